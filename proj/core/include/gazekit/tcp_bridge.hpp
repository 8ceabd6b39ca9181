#pragma once

#include "gazekit/bus.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace gazekit {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Parses "host:port". Throws DataError on a malformed address.
Endpoint parse_endpoint(const std::string& text);

/// Forwards bus messages to every connected TCP client as wire frames.
/// Each client gets its own bus subscription, so a slow client only loses
/// its own oldest messages.
class TcpBridge {
 public:
  /// Binds and starts accepting. Port 0 picks an ephemeral port.
  TcpBridge(Bus& bus, const Endpoint& bind, std::string prefix = "");
  ~TcpBridge();
  TcpBridge(const TcpBridge&) = delete;
  TcpBridge& operator=(const TcpBridge&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  std::size_t clients() const noexcept { return clients_.load(); }
  /// Blocks until `n` clients have connected or the timeout expires.
  bool wait_for_clients(std::size_t n, double timeout_seconds) const;
  void stop();

 private:
  void accept_loop();
  void serve(int fd, std::shared_ptr<Subscription> sub);

  Bus& bus_;
  std::string prefix_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{true};
  std::atomic<std::size_t> clients_{0};
  std::thread acceptor_;
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
};

/// Blocking client for the bridge.
class TcpSubscriber {
 public:
  explicit TcpSubscriber(const Endpoint& server);
  ~TcpSubscriber();
  TcpSubscriber(const TcpSubscriber&) = delete;
  TcpSubscriber& operator=(const TcpSubscriber&) = delete;

  /// Next message, or nothing once the server closed the connection.
  std::optional<Message> receive();

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace gazekit
