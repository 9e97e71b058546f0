#include "iact/io/binary.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "iact/core/error.hpp"

namespace iact::io {

static_assert(std::endian::native == std::endian::little, "byte layouts assume a little-endian host");

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f32s(std::span<const float> v) {
  const std::size_t at = out_.size();
  out_.resize(at + v.size() * sizeof(float));
  if (!v.empty()) std::memcpy(out_.data() + at, v.data(), v.size() * sizeof(float));
}

void ByteReader::fail(const std::string& msg) const {
  throw FormatError(what_ + ": " + msg + " (at offset " + std::to_string(pos_) + ")");
}

void ByteReader::need(std::size_t n) const {
  if (n > remaining()) {
    fail("truncated: need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " available");
  }
}

std::string ByteReader::bytes(std::size_t n) {
  need(n);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

void ByteReader::f32s(std::span<float> out) {
  if (out.size() > std::numeric_limits<std::size_t>::max() / sizeof(float)) fail("array length overflows");
  const std::size_t n = out.size() * sizeof(float);
  need(n);
  if (n > 0) std::memcpy(out.data(), data_.data() + pos_, n);
  pos_ += n;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> buf(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size))) {
    throw Error("failed reading " + path.string());
  }
  return buf;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw FormatError("declared size overflows 64 bits");
  return r;
}

}  // namespace iact::io
