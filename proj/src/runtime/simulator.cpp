#include "nups/runtime/simulator.hpp"

#include <stdexcept>

namespace nups {

void Simulator::post_after(Micros delay, std::function<void()> fn) {
  if (delay < Micros::zero()) delay = Micros::zero();
  schedule_at(now_ + delay, std::move(fn));
}

void Simulator::schedule_at(Micros when, std::function<void()> fn) {
  if (when < now_) when = now_;
  queue_.push(Event{when, next_seq_++, std::move(fn)});
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  // Moving out of top() is fine: the element is popped right after.
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  now_ = ev.when;
  ++executed_;
  ev.fn();
  return true;
}

bool Simulator::run_until(const std::function<bool()>& done) {
  while (!done()) {
    if (!step()) return done();
  }
  return true;
}

void Simulator::run_for(Micros duration) {
  const Micros until = now_ + duration;
  while (!queue_.empty() && queue_.top().when <= until) step();
  now_ = until;
}

}  // namespace nups
