#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <queue>
#include <thread>
#include <vector>

#include "nups/runtime/runtime.hpp"

namespace nups {

/// Wall-clock runtime. Callbacks run on a single timer thread in due order.
class ThreadRuntime final : public Runtime {
 public:
  ThreadRuntime();
  ~ThreadRuntime() override;

  ThreadRuntime(const ThreadRuntime&) = delete;
  ThreadRuntime& operator=(const ThreadRuntime&) = delete;

  Micros now() const override;
  bool is_virtual() const override { return false; }

  void post(std::function<void()> fn) override { post_after(Micros::zero(), std::move(fn)); }
  void post_after(Micros delay, std::function<void()> fn) override;

  /// Stops the timer thread; pending callbacks are dropped.
  void shutdown();

 private:
  struct Timer {
    Micros when;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Timer& a, const Timer& b) const {
      return a.when != b.when ? a.when > b.when : a.seq > b.seq;
    }
  };

  void loop(std::stop_token stop);

  const std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::priority_queue<Timer, std::vector<Timer>, Later> timers_;
  std::uint64_t next_seq_ = 0;
  std::jthread thread_;
};

}  // namespace nups
