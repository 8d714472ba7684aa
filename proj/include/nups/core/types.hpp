#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nups {

using Key = std::uint64_t;
using NodeId = std::uint32_t;

#ifdef NUPS_SINGLE_PRECISION
using Scalar = float;
#else
using Scalar = double;
#endif

/// A parameter value or an additive update. Length is the model's value_dim.
using Value = std::vector<Scalar>;

/// Virtual or wall time, always in microseconds.
using Micros = std::chrono::microseconds;

inline constexpr Micros kNever = Micros::max();

enum class Technique : std::uint8_t { Replicated, Relocated };

std::string_view to_string(Technique t);

/// Why a message was sent. Used for attribution in reports.
enum class Cause : std::uint8_t { Direct, Relocation, Sampling, Sync };

inline constexpr std::size_t kNumCauses = 4;

std::string_view to_string(Cause c);

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TechniqueMismatch : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExhaustedHandle : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Contiguous block of fixed-width values, one row per key.
class ValueBlock {
 public:
  ValueBlock() = default;
  ValueBlock(std::size_t rows, std::size_t dim) : dim_(dim), data_(rows * dim) {}

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }

  std::span<Scalar> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const Scalar> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  void append(std::span<const Scalar> v) { data_.insert(data_.end(), v.begin(), v.end()); }
  void resize_rows(std::size_t rows) { data_.resize(rows * dim_); }

  std::vector<Scalar>& flat() { return data_; }
  const std::vector<Scalar>& flat() const { return data_; }

 private:
  std::size_t dim_ = 0;
  std::vector<Scalar> data_;
};

}  // namespace nups
