#pragma once

#include "gazekit/surface.hpp"
#include "gazekit/types.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazekit {

/// Topics a publisher may use.
inline constexpr std::string_view kTopics[] = {"pupil", "gaze", "surface", "latency"};
bool is_known_topic(std::string_view topic);

struct Message {
  std::string topic;
  std::string payload;  // JSON object
  std::uint64_t seq = 0;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Wire frame: u16 big-endian topic length, topic, u32 big-endian payload
/// length, payload. The payload carries the sequence number as its "seq"
/// member.
std::string encode_frame(const Message& m);

/// Decodes one frame from the front of `buf`. Returns nothing when `buf` holds
/// only part of a frame; throws DataError for a malformed frame. `consumed`
/// receives the frame size.
std::optional<Message> decode_frame(std::string_view buf, std::size_t& consumed);

inline constexpr std::size_t kDefaultQueueCapacity = 1024;

/// Bounded per-subscriber queue. When full, the oldest message is dropped.
class Subscription {
 public:
  Subscription(std::string prefix, std::size_t capacity);

  const std::string& prefix() const noexcept { return prefix_; }
  bool matches(std::string_view topic) const noexcept { return topic.starts_with(prefix_); }

  /// Blocks until a message arrives; empty once the bus is closed and the
  /// queue is drained.
  std::optional<Message> pop();
  /// Like pop() but gives up after `timeout`.
  std::optional<Message> pop_for(std::chrono::milliseconds timeout);
  std::optional<Message> try_pop();

  std::uint64_t dropped() const;
  std::size_t pending() const;
  bool closed() const;

 private:
  friend class Bus;
  void push(const Message& m);
  void close();

  std::string prefix_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Message> queue_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

/// In-process publish/subscribe hub. Publishing never blocks on subscribers:
/// each subscriber owns a bounded queue.
class Bus {
 public:
  Bus() = default;
  ~Bus();
  Bus(const Bus&) = delete;
  Bus& operator=(const Bus&) = delete;

  /// Assigns the next per-topic sequence number and fans the message out.
  /// Throws DataError for an unknown topic, or when the bus is closed.
  std::uint64_t publish(const std::string& topic, std::string payload);

  std::shared_ptr<Subscription> subscribe(std::string prefix,
                                          std::size_t capacity = kDefaultQueueCapacity);
  void unsubscribe(const std::shared_ptr<Subscription>& sub);

  /// Ends every subscription's stream.
  void close();
  bool closed() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::uint64_t, std::less<>> next_seq_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  bool closed_ = false;
};

/// JSON payloads per topic.
std::string pupil_payload(const PupilDatum& p);
std::string gaze_payload(const GazeDatum& g);
std::string surface_payload(const std::string& surface, const SurfaceGaze& s);

}  // namespace gazekit
