#include "gazekit/bus.hpp"

#include "gazekit/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace gazekit {

bool is_known_topic(std::string_view topic) {
  return std::find(std::begin(kTopics), std::end(kTopics), topic) != std::end(kTopics);
}

std::string encode_frame(const Message& m) {
  if (m.topic.size() > 0xFFFF) throw DataError("topic too long for wire frame");
  nlohmann::json body;
  try {
    body = m.payload.empty() ? nlohmann::json::object() : nlohmann::json::parse(m.payload);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("message payload is not JSON: ") + e.what());
  }
  if (!body.is_object()) throw DataError("message payload must be a JSON object");
  body["seq"] = m.seq;
  const std::string payload = body.dump();
  if (payload.size() > 0xFFFFFFFFull) throw DataError("payload too long for wire frame");

  std::string out;
  out.reserve(6 + m.topic.size() + payload.size());
  const auto t = static_cast<std::uint16_t>(m.topic.size());
  out.push_back(static_cast<char>(t >> 8));
  out.push_back(static_cast<char>(t & 0xFF));
  out += m.topic;
  const auto p = static_cast<std::uint32_t>(payload.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((p >> shift) & 0xFF));
  out += payload;
  return out;
}

std::optional<Message> decode_frame(std::string_view buf, std::size_t& consumed) {
  const auto byte = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i])); };
  if (buf.size() < 2) return std::nullopt;
  const std::size_t tlen = (byte(0) << 8) | byte(1);
  if (buf.size() < 2 + tlen + 4) return std::nullopt;
  const std::size_t o = 2 + tlen;
  const std::size_t plen = (byte(o) << 24) | (byte(o + 1) << 16) | (byte(o + 2) << 8) | byte(o + 3);
  if (buf.size() < o + 4 + plen) return std::nullopt;

  Message m;
  m.topic = std::string(buf.substr(2, tlen));
  try {
    auto body = nlohmann::json::parse(buf.substr(o + 4, plen));
    if (!body.is_object() || !body.contains("seq")) throw DataError("frame payload lacks seq");
    m.seq = body.at("seq").get<std::uint64_t>();
    body.erase("seq");
    m.payload = body.dump();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed frame payload: ") + e.what());
  }
  consumed = o + 4 + plen;
  return m;
}

Subscription::Subscription(std::string prefix, std::size_t capacity)
    : prefix_(std::move(prefix)), capacity_(capacity) {
  if (capacity_ == 0) throw DataError("subscription capacity must be positive");
}

void Subscription::push(const Message& m) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (queue_.size() == capacity_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(m);
  }
  cv_.notify_one();
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<Message> Subscription::pop() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::optional<Message> Subscription::pop_for(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::optional<Message> Subscription::try_pop() {
  std::lock_guard lock(mutex_);
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::uint64_t Subscription::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

std::size_t Subscription::pending() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

Bus::~Bus() { close(); }

std::uint64_t Bus::publish(const std::string& topic, std::string payload) {
  if (!is_known_topic(topic)) throw DataError("unknown topic '" + topic + "'");
  Message m{topic, std::move(payload), 0};
  // Holding the bus lock during fan-out keeps delivery order equal to
  // sequence order per topic; subscribers never block the publisher.
  std::lock_guard lock(mutex_);
  if (closed_) throw DataError("bus is closed");
  m.seq = next_seq_[topic]++;
  for (const auto& s : subs_)
    if (s->matches(m.topic)) s->push(m);
  return m.seq;
}

std::shared_ptr<Subscription> Bus::subscribe(std::string prefix, std::size_t capacity) {
  auto sub = std::make_shared<Subscription>(std::move(prefix), capacity);
  std::lock_guard lock(mutex_);
  if (closed_) sub->close();
  else subs_.push_back(sub);
  return sub;
}

void Bus::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  std::lock_guard lock(mutex_);
  std::erase(subs_, sub);
  sub->close();
}

void Bus::close() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  for (const auto& s : subs_) s->close();
  subs_.clear();
}

bool Bus::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

namespace {

nlohmann::json pupil_json(const PupilDatum& p) {
  return {{"timestamp", p.timestamp},
          {"confidence", p.confidence},
          {"norm_pos", {p.norm_pos.x(), p.norm_pos.y()}},
          {"ellipse",
           {{"center", {p.ellipse.center.x(), p.ellipse.center.y()}},
            {"axes", {p.ellipse.a, p.ellipse.b}},
            {"angle", p.ellipse.theta}}}};
}

}  // namespace

std::string pupil_payload(const PupilDatum& p) { return pupil_json(p).dump(); }

std::string gaze_payload(const GazeDatum& g) {
  nlohmann::json j{{"timestamp", g.timestamp},
                   {"confidence", g.base.confidence},
                   {"norm_pos", {g.norm_pos.x(), g.norm_pos.y()}},
                   {"base", pupil_json(g.base)}};
  return j.dump();
}

std::string surface_payload(const std::string& surface, const SurfaceGaze& s) {
  nlohmann::json j{{"name", surface},
                   {"timestamp", s.timestamp},
                   {"norm_pos", {s.norm_pos.x(), s.norm_pos.y()}},
                   {"on_surface", s.on_surface}};
  return j.dump();
}

}  // namespace gazekit
