#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "nups/runtime/runtime.hpp"

namespace nups {

/// Deterministic discrete-event loop. Events fire in (time, insertion) order,
/// so identical inputs replay identically.
class Simulator final : public Runtime {
 public:
  Micros now() const override { return now_; }
  bool is_virtual() const override { return true; }

  void post(std::function<void()> fn) override { schedule_at(now_, std::move(fn)); }
  void post_after(Micros delay, std::function<void()> fn) override;

  void schedule_at(Micros when, std::function<void()> fn);

  /// Runs one event. Returns false if the queue is empty.
  bool step();

  /// Runs until `done()` holds (checked before every event) or the queue drains.
  /// Returns whether `done()` holds.
  bool run_until(const std::function<bool()>& done);

  /// Runs all events with time <= `until`; the clock ends at `until`.
  void run_for(Micros duration);

  std::size_t pending_events() const { return queue_.size(); }
  std::uint64_t executed_events() const { return executed_; }

 private:
  struct Event {
    Micros when;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.when != b.when ? a.when > b.when : a.seq > b.seq;
    }
  };

  Micros now_{0};
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

}  // namespace nups
