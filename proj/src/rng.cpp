#include "histoprism/rng.hpp"

#include <cmath>

namespace histoprism {

double Rng::next_gaussian() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  // u1 in (0,1] so log() is safe.
  double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  double u2 = next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 6.283185307179586476925286766559 * u2;
  cached_ = r * std::sin(theta);
  have_cached_ = true;
  return r * std::cos(theta);
}

}  // namespace histoprism
