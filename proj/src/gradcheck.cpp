#include "histoprism/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "histoprism/rng.hpp"

namespace histoprism {

double GradCheckReport::worst_rel_err() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_err);
  return w;
}

GradCheckReport check_gradients(const TensorLossFn& loss, std::vector<Matrix> tensors,
                                const std::vector<std::string>& names, int probes_per_tensor,
                                double step, std::uint64_t seed, double atol) {
  if (step < 1e-7 || step > 1e-3)
    throw std::invalid_argument("check_gradients: step must be in [1e-7, 1e-3]");
  if (probes_per_tensor < 1)
    throw std::invalid_argument("check_gradients: need at least one probe per tensor");
  if (tensors.size() != names.size())
    throw std::invalid_argument("check_gradients: one name per tensor required");

  std::vector<Matrix> analytic;
  loss(tensors, &analytic);
  if (analytic.size() != tensors.size())
    throw std::runtime_error("check_gradients: loss returned wrong gradient count");

  GradCheckReport report;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Rng rng(seed, t);
    GradCheckEntry entry;
    entry.tensor = names[t];
    const std::size_t n = tensors[t].size();
    if (n == 0) {
      report.entries.push_back(entry);
      continue;
    }
    for (int p = 0; p < probes_per_tensor; ++p) {
      std::size_t k = static_cast<std::size_t>(rng.next_below(n));
      double saved = tensors[t].data()[k];

      tensors[t].data()[k] = saved + step;
      double fp = loss(tensors, nullptr);
      tensors[t].data()[k] = saved - step;
      double fm = loss(tensors, nullptr);
      tensors[t].data()[k] = saved;

      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        ++entry.probes_skipped;
        continue;
      }
      double numeric = (fp - fm) / (2.0 * step);
      double exact = analytic[t].data()[k];
      ++entry.probes_checked;
      if (std::fabs(numeric) < atol && std::fabs(exact) < atol) continue;
      double denom = std::max({std::fabs(numeric), std::fabs(exact), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, std::fabs(numeric - exact) / denom);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace histoprism
