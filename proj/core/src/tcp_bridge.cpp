#include "gazekit/tcp_bridge.hpp"

#include "gazekit/error.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>

namespace gazekit {

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw DataError("expected host:port, got '" + text + "'");
  Endpoint e;
  e.host = text.substr(0, colon);
  unsigned port = 0;
  const char* first = text.data() + colon + 1;
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, port);
  if (ec != std::errc() || ptr != last || port > 65535) throw DataError("invalid port in '" + text + "'");
  e.port = static_cast<std::uint16_t>(port);
  return e;
}

namespace {

sockaddr_in resolve(const Endpoint& e) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(e.port);
  if (inet_pton(AF_INET, e.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
    throw IoError(e.host, "cannot resolve host");
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

TcpBridge::TcpBridge(Bus& bus, const Endpoint& bind, std::string prefix)
    : bus_(bus), prefix_(std::move(prefix)) {
  const std::string where = bind.host + ":" + std::to_string(bind.port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError(where, std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(bind);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    throw IoError(where, why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpBridge::~TcpBridge() { stop(); }

void TcpBridge::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto sub = bus_.subscribe(prefix_);
    ++clients_;
    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, fd, sub] { serve(fd, sub); });
  }
}

void TcpBridge::serve(int fd, std::shared_ptr<Subscription> sub) {
  while (true) {
    auto m = sub->pop_for(std::chrono::milliseconds(50));
    if (!m) {
      if (sub->closed() || !running_) break;
      continue;
    }
    if (!send_all(fd, encode_frame(*m))) break;
  }
  bus_.unsubscribe(sub);
  ::shutdown(fd, SHUT_RDWR);
  ::close(fd);
}

bool TcpBridge::wait_for_clients(std::size_t n, double timeout_seconds) const {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  while (clients_.load() < n) {
    if (std::chrono::steady_clock::now() >= deadline) return false;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return true;
}

void TcpBridge::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mutex_);
    workers.swap(workers_);
  }
  // Workers drain what is already queued, then exit on the closed flag.
  for (auto& w : workers) w.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

TcpSubscriber::TcpSubscriber(const Endpoint& server) {
  const std::string where = server.host + ":" + std::to_string(server.port);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw IoError(where, std::strerror(errno));
  sockaddr_in addr = resolve(server);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    throw IoError(where, why);
  }
}

TcpSubscriber::~TcpSubscriber() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<Message> TcpSubscriber::receive() {
  char chunk[4096];
  while (true) {
    std::size_t used = 0;
    if (auto m = decode_frame(buffer_, used)) {
      buffer_.erase(0, used);
      return m;
    }
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace gazekit
