#include "nups/transport/wire.hpp"

#include <bit>
#include <cstring>
#include <string>
#include <type_traits>

namespace nups::wire {
namespace {

using ScalarBits = std::conditional_t<sizeof(Scalar) == 8, std::uint64_t, std::uint32_t>;

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}
  template <typename T>
  void put(T v) {
    static_assert(std::is_integral_v<T>);
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void put_scalar(Scalar s) {
    put(std::bit_cast<ScalarBits>(s));
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > in_.size()) throw InvalidInput("wire: truncated frame");
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out;
  const std::size_t body =
      kHeaderBytes + 8 * (m.keys.size() + m.versions.size()) + sizeof(Scalar) * m.payload.size();
  out.reserve(kLengthBytes + body);
  Writer w(out);
  w.put(static_cast<std::uint32_t>(body));
  w.put(kVersion);
  w.put(static_cast<std::uint8_t>(m.kind));
  w.put(static_cast<std::uint8_t>(m.cause));
  w.put(static_cast<std::uint8_t>(sizeof(Scalar)));
  w.put(m.sender);
  w.put(m.receiver);
  w.put(m.origin);
  w.put(m.stage);
  w.put(m.request_id);
  w.put(static_cast<std::uint32_t>(m.keys.size()));
  w.put(static_cast<std::uint32_t>(m.versions.size()));
  w.put(static_cast<std::uint32_t>(m.payload.size()));
  for (Key k : m.keys) w.put(k);
  for (auto v : m.versions) w.put(v);
  for (Scalar s : m.payload) w.put_scalar(s);
  return out;
}

Message decode_body(std::span<const std::uint8_t> body) {
  Reader r(body);
  if (r.get<std::uint8_t>() != kVersion) throw InvalidInput("wire: unsupported version");
  Message m;
  const auto kind = r.get<std::uint8_t>();
  const auto cause = r.get<std::uint8_t>();
  const auto scalar_bytes = r.get<std::uint8_t>();
  if (kind >= kNumMessageKinds) throw InvalidInput("wire: bad message kind " + std::to_string(kind));
  if (cause >= kNumCauses) throw InvalidInput("wire: bad cause " + std::to_string(cause));
  if (scalar_bytes != sizeof(Scalar)) throw InvalidInput("wire: scalar width mismatch");
  m.kind = static_cast<MessageKind>(kind);
  m.cause = static_cast<Cause>(cause);
  m.sender = r.get<std::uint32_t>();
  m.receiver = r.get<std::uint32_t>();
  m.origin = r.get<std::uint32_t>();
  m.stage = r.get<std::uint32_t>();
  m.request_id = r.get<std::uint64_t>();
  const auto n_keys = r.get<std::uint32_t>();
  const auto n_versions = r.get<std::uint32_t>();
  const auto n_payload = r.get<std::uint32_t>();
  const std::size_t need = 8ull * (n_keys + std::size_t{n_versions}) + sizeof(Scalar) * std::size_t{n_payload};
  if (r.remaining() != need) throw InvalidInput("wire: body length does not match counts");
  m.keys.resize(n_keys);
  for (auto& k : m.keys) k = r.get<std::uint64_t>();
  m.versions.resize(n_versions);
  for (auto& v : m.versions) v = r.get<std::uint64_t>();
  m.payload.resize(n_payload);
  for (auto& s : m.payload) s = std::bit_cast<Scalar>(r.get<ScalarBits>());
  return m;
}

Message decode(std::span<const std::uint8_t> frame) {
  if (frame.size() < kLengthBytes) throw InvalidInput("wire: frame shorter than length prefix");
  Reader r(frame.first(kLengthBytes));
  const auto len = r.get<std::uint32_t>();
  if (frame.size() != kLengthBytes + len) throw InvalidInput("wire: length prefix mismatch");
  return decode_body(frame.subspan(kLengthBytes));
}

}  // namespace nups::wire
