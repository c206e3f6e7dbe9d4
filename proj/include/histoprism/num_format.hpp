#pragma once

#include <charconv>
#include <string>

namespace histoprism {

/// Shortest decimal form that parses back to the same double; used by every
/// text/CSV writer so reports stay both readable and lossless.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace histoprism
