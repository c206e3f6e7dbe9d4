#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "histoprism/matrix.hpp"

namespace histoprism {

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
  int probes_checked = 0;
  int probes_skipped = 0;  // non-finite loss at a probe point
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst_rel_err() const;
  bool all_below(double tol) const { return worst_rel_err() < tol; }
};

/// Scalar loss over a flat list of tensors. When `grads` is non-null the
/// callee fills one gradient matrix per tensor (analytic, via its tape).
using TensorLossFn =
    std::function<double(const std::vector<Matrix>& tensors, std::vector<Matrix>* grads)>;

/// Compares tape gradients against central finite differences,
/// (f(x+h) - f(x-h)) / 2h, at `probes_per_tensor` seeded random entries of
/// each tensor. Relative error uses max(|analytic|, |numeric|, 1e-8) as the
/// denominator; when both sides are below `atol` the probe counts as exact
/// (structurally zero gradients, e.g. a key bias through softmax, would
/// otherwise compare finite-difference roundoff against zero). step must lie
/// in [1e-7, 1e-3].
GradCheckReport check_gradients(const TensorLossFn& loss, std::vector<Matrix> tensors,
                                const std::vector<std::string>& names, int probes_per_tensor,
                                double step, std::uint64_t seed, double atol = 1e-7);

}  // namespace histoprism
