#pragma once

#include <functional>

#include "nups/core/types.hpp"

namespace nups {

/// Execution environment shared by all nodes of a cluster: a clock plus a way
/// to run callbacks later. The simulator runs everything on one thread in
/// virtual time; the threaded runtime uses the wall clock and a timer thread.
class Runtime {
 public:
  virtual ~Runtime() = default;

  virtual Micros now() const = 0;

  /// True when coroutines suspend and are resumed by runtime events. False
  /// when awaiting blocks the calling thread instead.
  virtual bool is_virtual() const = 0;

  virtual void post(std::function<void()> fn) = 0;
  virtual void post_after(Micros delay, std::function<void()> fn) = 0;
};

}  // namespace nups
