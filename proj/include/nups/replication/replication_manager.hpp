#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

#include "nups/ps/store.hpp"
#include "nups/replication/recursive_doubling.hpp"
#include "nups/transport/message.hpp"

namespace nups {

struct SyncStats {
  std::uint64_t rounds_started = 0;
  std::uint64_t rounds_completed = 0;
  Micros first_start{0};
  Micros last_start{0};
  Micros last_end{0};
  Micros total_round_time{0};
  std::uint64_t keys_sent = 0;

  /// Round starts per second over the observed span, 0 with fewer than two rounds.
  double achieved_frequency_hz() const;
};

/// Eagerly replicated keys: every node holds a full replica, writes are
/// accumulated locally and merged by periodic sparse all-reduce rounds.
class ReplicationManager {
 public:
  using RoundHook = std::function<void(std::uint64_t round)>;

  ReplicationManager(NodeEnv env, std::vector<Key> replicated_keys);

  /// Reads the local view: replica plus everything written here and not yet
  /// merged by a completed round.
  void read_locked(const KeySlot& s, Key k, std::span<Scalar> out) const;
  void read(Key k, std::span<Scalar> out) const;

  /// Accumulates `delta` (after clipping, if enabled) for the next round.
  void write_locked(KeySlot& s, Key k, std::span<const Scalar> delta);
  void write(Key k, std::span<const Scalar> delta);

  bool has_replicated_keys() const { return !keys_.empty(); }
  const std::vector<Key>& keys() const { return keys_; }

  /// Starts this node's next round right away. Every node must start the same
  /// rounds; messages of rounds not started yet locally are buffered.
  void start_round();
  void handle(Message&& m);

  bool round_active() const;
  SyncStats stats() const;

  /// Runs rounds every staleness interval (or back to back when a round
  /// overruns). No-op without replicated keys or with an infinite interval.
  void start_schedule();
  /// Lets the schedule run until `total_rounds` rounds have started, then stops it.
  void stop_schedule_at(std::uint64_t total_rounds);

  void set_round_hook(RoundHook hook) { round_hook_ = std::move(hook); }

 private:
  enum class Phase { Idle, WaitFold, Exchange, WaitUnfold };
  using Partial = std::map<Key, Value>;

  void progress_locked();
  void send_partial_locked(NodeId to, std::uint32_t stage);
  void merge_locked(const Message& m);
  void finish_locked();
  void arm_timer_locked(Micros delay);
  void on_timer(std::uint64_t generation);

  NodeEnv env_;
  std::vector<Key> keys_;
  RecursiveDoubling pattern_;

  mutable std::mutex mu_;
  Phase phase_ = Phase::Idle;
  std::uint64_t round_ = 0;  // id of the running (or next) round
  std::uint32_t stage_ = 0;
  Partial partial_;
  std::map<std::pair<std::uint64_t, std::uint32_t>, Message> early_;
  Micros round_start_{0};
  SyncStats stats_;

  bool scheduled_ = false;
  std::uint64_t generation_ = 0;
  std::uint64_t round_limit_ = UINT64_MAX;

  RoundHook round_hook_;
};

}  // namespace nups
