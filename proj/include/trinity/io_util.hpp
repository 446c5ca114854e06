#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "trinity/error.hpp"

namespace trinity {

std::vector<uint8_t> read_file_bytes(const std::string& path);

// Writes to "<path>.tmp" then renames, so a failed write never leaves a
// partial file at the final path.
void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes);

// Little-endian append helpers.
inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::vector<uint8_t>& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((bits >> (8 * i)) & 0xFF));
}

// Cursor over a byte buffer; all reads raise ParseError naming the offset on
// truncation.
class ByteReader {
 public:
  ByteReader(const std::vector<uint8_t>& bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  size_t offset() const { return pos_; }
  size_t remaining() const { return bytes_.size() - pos_; }

  void require(size_t n, const char* what) const {
    if (remaining() < n) {
      throw ParseError(source_ + ": truncated while reading " + std::string(what) +
                       " at byte offset " + std::to_string(pos_));
    }
  }

  uint8_t u8(const char* what) {
    require(1, what);
    return bytes_[pos_++];
  }

  uint16_t u16(const char* what) {
    require(2, what);
    uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

  uint32_t u32(const char* what) {
    require(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64(const char* what) {
    require(8, what);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string str(size_t n, const char* what) {
    require(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data()) + pos_, n);
    pos_ += n;
    return s;
  }

  const std::string& source() const { return source_; }

 private:
  const std::vector<uint8_t>& bytes_;
  std::string source_;
  size_t pos_ = 0;
};

}  // namespace trinity
