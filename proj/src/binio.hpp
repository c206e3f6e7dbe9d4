#pragma once

// Little-endian binary packing helpers shared by the tensor container and
// checkpoint writers. Byte layouts are documented in docs/file_formats.md.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "histoprism/matrix.hpp"

namespace histoprism::binio {

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& buf, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(buf, bits);
}

class Reader {
 public:
  Reader(std::string bytes, std::string source)
      : bytes_(std::move(bytes)), source_(std::move(source)) {}

  std::uint32_t get_u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t get_u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double get_f64() {
    std::uint64_t bits = get_u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_magic(const std::string& magic) {
    if (get_bytes(magic.size()) != magic)
      throw std::runtime_error(source_ + ": bad magic at offset 0");
  }
  std::size_t offset() const { return pos_; }
  bool exhausted() const { return pos_ == bytes_.size(); }
  void require_exhausted() const {
    if (!exhausted())
      throw std::runtime_error(source_ + ": trailing bytes at offset " + std::to_string(pos_));
  }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size())
      throw std::runtime_error(source_ + ": truncated at offset " + std::to_string(pos_) +
                               " (need " + std::to_string(n) + " more bytes)");
  }
  std::string bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

}  // namespace histoprism::binio
