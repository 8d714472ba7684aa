#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>

#include "nups/core/types.hpp"

namespace nups::detail {

static_assert(std::endian::native == std::endian::little, "dataset files are written in host order");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw InvalidInput("cannot write " + path);
  }
  template <typename T>
  void put(T v) {
    static_assert(std::is_arithmetic_v<T>);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void magic(const char (&m)[9]) { out_.write(m, 8); }
  void finish(const std::string& path) {
    out_.flush();
    if (!out_) throw InvalidInput("short write to " + path);
  }

 private:
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw InvalidInput("cannot read " + path);
  }
  template <typename T>
  T get() {
    static_assert(std::is_arithmetic_v<T>);
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw InvalidInput(path_ + ": truncated file");
    return v;
  }
  void expect_magic(const char (&m)[9]) {
    char buf[8];
    in_.read(buf, 8);
    if (!in_ || std::memcmp(buf, m, 8) != 0) throw InvalidInput(path_ + ": not a dataset file of the expected kind");
  }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace nups::detail
