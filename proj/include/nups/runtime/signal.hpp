#pragma once

#include <condition_variable>
#include <coroutine>
#include <cstddef>
#include <memory>
#include <mutex>
#include <utility>

#include "nups/runtime/runtime.hpp"

namespace nups {

/// Countdown that a coroutine can await. Producers call arrive() from message
/// handlers; the waiter is resumed through Runtime::post, never inline, so a
/// handler holding a key latch cannot re-enter worker code. Producers keep the
/// signal alive through a shared_ptr.
class Signal {
 public:
  explicit Signal(Runtime& rt) : rt_(rt) {}

  void expect(std::size_t n = 1) {
    std::lock_guard lock(mu_);
    remaining_ += n;
  }

  void arrive() {
    std::coroutine_handle<> waiter;
    {
      std::lock_guard lock(mu_);
      if (--remaining_ != 0) return;
      waiter = std::exchange(waiter_, {});
      cv_.notify_all();
    }
    if (waiter) rt_.post([waiter] { waiter.resume(); });
  }

  bool ready() const {
    std::lock_guard lock(mu_);
    return remaining_ == 0;
  }

  auto wait() {
    struct Awaiter {
      Signal& s;
      bool await_ready() {
        std::unique_lock lock(s.mu_);
        if (s.remaining_ == 0) return true;
        if (s.rt_.is_virtual()) return false;
        s.cv_.wait(lock, [&] { return s.remaining_ == 0; });
        return true;
      }
      bool await_suspend(std::coroutine_handle<> h) {
        std::lock_guard lock(s.mu_);
        if (s.remaining_ == 0) return false;
        s.waiter_ = h;
        return true;
      }
      void await_resume() const noexcept {}
    };
    return Awaiter{*this};
  }

 private:
  Runtime& rt_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t remaining_ = 0;
  std::coroutine_handle<> waiter_;
};

/// Suspends for `d` of virtual time; a no-op under a blocking runtime.
inline auto sleep_for(Runtime& rt, Micros d) {
  struct Awaiter {
    Runtime& rt;
    Micros d;
    bool await_ready() const { return !rt.is_virtual() || d <= Micros::zero(); }
    void await_suspend(std::coroutine_handle<> h) { rt.post_after(d, [h] { h.resume(); }); }
    void await_resume() const noexcept {}
  };
  return Awaiter{rt, d};
}

}  // namespace nups
