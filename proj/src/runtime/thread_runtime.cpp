#include "nups/runtime/thread_runtime.hpp"

namespace nups {

ThreadRuntime::ThreadRuntime() : thread_([this](std::stop_token st) { loop(st); }) {}

ThreadRuntime::~ThreadRuntime() { shutdown(); }

void ThreadRuntime::shutdown() {
  if (thread_.joinable()) {
    thread_.request_stop();
    cv_.notify_all();
    thread_.join();
  }
}

Micros ThreadRuntime::now() const {
  return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now() - start_);
}

void ThreadRuntime::post_after(Micros delay, std::function<void()> fn) {
  {
    std::lock_guard lock(mu_);
    timers_.push(Timer{now() + std::max(delay, Micros::zero()), next_seq_++, std::move(fn)});
  }
  cv_.notify_all();
}

void ThreadRuntime::loop(std::stop_token stop) {
  std::unique_lock lock(mu_);
  while (!stop.stop_requested()) {
    if (timers_.empty()) {
      cv_.wait(lock, stop, [&] { return !timers_.empty(); });
      continue;
    }
    const Micros due = timers_.top().when;
    const Micros t = now();
    if (due > t) {
      cv_.wait_for(lock, stop, due - t, [&] { return !timers_.empty() && timers_.top().when < due; });
      continue;
    }
    auto fn = std::move(const_cast<Timer&>(timers_.top()).fn);
    timers_.pop();
    lock.unlock();
    fn();
    lock.lock();
  }
}

}  // namespace nups
