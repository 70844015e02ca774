// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "distad/error.hpp"

namespace distad::detail {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_doubles(std::span<const double> v) {
    put<std::uint64_t>(v.size());
    for (double x : v) put(x);
  }
  void put_u32s(std::span<const std::uint32_t> v) {
    put<std::uint64_t>(v.size());
    for (auto x : v) put(x);
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, const char* what) : bytes_(bytes), what_(what) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<double> get_doubles(std::size_t limit) {
    const auto n = length(limit, sizeof(double));
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>();
    return v;
  }
  std::vector<std::uint32_t> get_u32s(std::size_t limit) {
    const auto n = length(limit, sizeof(std::uint32_t));
    std::vector<std::uint32_t> v(n);
    for (auto& x : v) x = get<std::uint32_t>();
    return v;
  }
  std::string get_string(std::size_t limit) {
    const auto n = length(limit, 1);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect_raw(const char* s, std::size_t n) {
    need(n);
    if (std::memcmp(bytes_.data() + pos_, s, n) != 0) {
      throw StateCorrupt(std::string(what_) + ": bad magic");
    }
    pos_ += n;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::size_t length(std::size_t limit, std::size_t width) {
    const auto n = get<std::uint64_t>();
    if (n > limit) throw StateCorrupt(std::string(what_) + ": implausible length");
    need(n * width);
    return static_cast<std::size_t>(n);
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw StateCorrupt(std::string(what_) + ": truncated");
  }

  std::span<const std::uint8_t> bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Writes to a temporary file and renames it over `path`.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace distad::detail
