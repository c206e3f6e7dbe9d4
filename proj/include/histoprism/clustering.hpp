#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histoprism/matrix.hpp"

namespace histoprism {

struct KmeansResult {
  std::vector<std::size_t> labels;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::size_t reseeds = 0;  // empty clusters re-seeded from the farthest point
};

/// Lloyd iterations with deterministic k-means++ seeding from `seed`
/// (cumulative D^2 sampling on the project PRNG). Runs n_init seeded
/// restarts and keeps the lowest-inertia result. Each run converges when
/// assignments stabilize or after max_iters; assignment ties go to the
/// lowest centroid.
KmeansResult kmeans_cluster(const Matrix& points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iters = 300, std::size_t n_init = 10);

/// Adjusted Mutual Information, (MI - E[MI]) / (mean(H_a, H_b) - E[MI]) with
/// the hypergeometric expected-MI model, natural log. When the denominator
/// degenerates (both sides a single cluster) the value is 1 for identical
/// partitions and 0 otherwise.
double ami(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

/// Adjusted Rand Index over the pair-counting contingency table; same
/// degenerate convention as ami.
double ari(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

struct ClusterEval {
  double ami = 0.0;
  double ari = 0.0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> labels;
};

/// Slide profile = mean predicted expression over patches; k = number of
/// distinct cancer labels; k-means labels scored against the cancer labels.
ClusterEval cluster_eval(const std::vector<Matrix>& predictions,
                         const std::vector<std::string>& cancer_labels, std::uint64_t seed);

}  // namespace histoprism
