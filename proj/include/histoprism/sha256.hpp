#pragma once

#include <string>

namespace histoprism {

/// Hex digest of a byte string (FIPS 180-4 SHA-256).
std::string sha256_hex(const std::string& bytes);

/// Hex digest of a file's contents.
std::string sha256_hex_file(const std::string& path);

}  // namespace histoprism
