#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iact::io {

/// Little-endian byte sink.
class ByteWriter {
 public:
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f32s(std::span<const float> v);

  const std::vector<std::uint8_t>& data() const noexcept { return out_; }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

/// Bounds-checked little-endian reader. Every failure is a FormatError that
/// names the byte offset and the number of bytes requested vs available.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string what) : data_(data), what_(std::move(what)) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  std::string bytes(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  void f32s(std::span<float> out);
  /// Fails unless the whole buffer has been consumed.
  void expect_end() const;
  [[noreturn]] void fail(const std::string& msg) const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// a * b, throwing FormatError on 64-bit overflow.
std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b);

}  // namespace iact::io
