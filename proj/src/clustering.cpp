#include "histoprism/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "histoprism/rng.hpp"

namespace histoprism {

namespace {

double dist_sq(const Matrix& points, std::size_t row, const std::vector<double>& center) {
  const double* p = points.row_ptr(row);
  double s = 0.0;
  for (std::size_t c = 0; c < points.cols(); ++c) {
    double d = p[c] - center[c];
    s += d * d;
  }
  return s;
}

bool partitions_equal(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::map<std::size_t, std::size_t> fwd, bwd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto f = fwd.emplace(a[i], b[i]);
    if (!f.second && f.first->second != b[i]) return false;
    auto g = bwd.emplace(b[i], a[i]);
    if (!g.second && g.first->second != a[i]) return false;
  }
  return true;
}

struct Contingency {
  std::vector<std::vector<double>> n;  // counts n_ij
  std::vector<double> a, b;            // marginals
  double total = 0.0;
};

Contingency contingency(const std::vector<std::size_t>& la, const std::vector<std::size_t>& lb) {
  if (la.size() != lb.size()) throw std::invalid_argument("clustering metric: length mismatch");
  if (la.size() < 2) throw std::invalid_argument("clustering metric: need at least two points");
  std::map<std::size_t, std::size_t> ia, ib;
  for (std::size_t v : la) ia.emplace(v, ia.size());
  for (std::size_t v : lb) ib.emplace(v, ib.size());
  Contingency c;
  c.n.assign(ia.size(), std::vector<double>(ib.size(), 0.0));
  c.a.assign(ia.size(), 0.0);
  c.b.assign(ib.size(), 0.0);
  for (std::size_t i = 0; i < la.size(); ++i) {
    std::size_t r = ia[la[i]], s = ib[lb[i]];
    c.n[r][s] += 1.0;
    c.a[r] += 1.0;
    c.b[s] += 1.0;
  }
  c.total = static_cast<double>(la.size());
  return c;
}

double entropy(const std::vector<double>& marginal, double n) {
  double h = 0.0;
  for (double v : marginal)
    if (v > 0.0) h -= (v / n) * std::log(v / n);
  return h;
}

}  // namespace

namespace {

KmeansResult kmeans_single_run(const Matrix& points, std::size_t k, Rng rng,
                               std::size_t max_iters) {
  const std::size_t n = points.rows(), d = points.cols();
  std::vector<std::vector<double>> centers;
  centers.reserve(k);

  // k-means++ seeding: first center uniform, the rest by cumulative D^2.
  {
    std::size_t first = static_cast<std::size_t>(rng.next_below(n));
    centers.emplace_back(points.row_ptr(first), points.row_ptr(first) + d);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = dist_sq(points, i, centers[0]);
    while (centers.size() < k) {
      double total = 0.0;
      for (double v : d2) total += v;
      std::size_t pick;
      if (total <= 0.0) {
        pick = static_cast<std::size_t>(rng.next_below(n));
      } else {
        double u = rng.next_double() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
      }
      centers.emplace_back(points.row_ptr(pick), points.row_ptr(pick) + d);
      for (std::size_t i = 0; i < n; ++i)
        d2[i] = std::min(d2[i], dist_sq(points, i, centers.back()));
    }
  }

  KmeansResult result;
  result.labels.assign(n, 0);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    ++result.iterations;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = dist_sq(points, i, centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        double dc = dist_sq(points, i, centers[c]);
        if (dc < bd) {
          bd = dc;
          best = c;
        }
      }
      if (result.labels[i] != best) {
        result.labels[i] = best;
        changed = true;
      }
    }
    // update means
    for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[result.labels[i]];
      const double* p = points.row_ptr(i);
      for (std::size_t c = 0; c < d; ++c) centers[result.labels[i]][c] += p[c];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          double di = dist_sq(points, i, centers[result.labels[i]]);
          if (di > fd) {
            fd = di;
            far = i;
          }
        }
        centers[c].assign(points.row_ptr(far), points.row_ptr(far) + d);
        ++result.reseeds;
        changed = true;
      } else {
        for (std::size_t j = 0; j < d; ++j)
          centers[c][j] /= static_cast<double>(counts[c]);
      }
    }
    if (!changed && iter > 0) break;
  }
  result.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    result.inertia += dist_sq(points, i, centers[result.labels[i]]);
  return result;
}

}  // namespace

KmeansResult kmeans_cluster(const Matrix& points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iters, std::size_t n_init) {
  if (k < 2) throw std::invalid_argument("kmeans_cluster: k must be >= 2");
  if (points.rows() < k)
    throw std::invalid_argument("kmeans_cluster: fewer points than clusters");
  if (n_init < 1) throw std::invalid_argument("kmeans_cluster: n_init must be >= 1");

  KmeansResult best;
  for (std::size_t run = 0; run < n_init; ++run) {
    KmeansResult r = kmeans_single_run(points, k, Rng(seed, 0xC1u + run), max_iters);
    if (run == 0 || r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

double ami(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  Contingency c = contingency(a, b);
  const double n = c.total;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.a.size(); ++i)
    for (std::size_t j = 0; j < c.b.size(); ++j) {
      double nij = c.n[i][j];
      if (nij > 0.0) mi += (nij / n) * std::log(n * nij / (c.a[i] * c.b[j]));
    }
  double ha = entropy(c.a, n), hb = entropy(c.b, n);

  // Expected MI under the hypergeometric model of random labelings with
  // fixed marginals, accumulated in log space via lgamma.
  double emi = 0.0;
  for (std::size_t i = 0; i < c.a.size(); ++i) {
    for (std::size_t j = 0; j < c.b.size(); ++j) {
      double ai = c.a[i], bj = c.b[j];
      double lo = std::max(1.0, ai + bj - n);
      double hi = std::min(ai, bj);
      for (double nij = lo; nij <= hi + 0.5; nij += 1.0) {
        double log_term = std::lgamma(ai + 1) + std::lgamma(bj + 1) + std::lgamma(n - ai + 1) +
                          std::lgamma(n - bj + 1) - std::lgamma(n + 1) - std::lgamma(nij + 1) -
                          std::lgamma(ai - nij + 1) - std::lgamma(bj - nij + 1) -
                          std::lgamma(n - ai - bj + nij + 1);
        emi += (nij / n) * std::log(n * nij / (ai * bj)) * std::exp(log_term);
      }
    }
  }

  double denom = 0.5 * (ha + hb) - emi;
  if (std::fabs(denom) < 1e-12) return partitions_equal(a, b) ? 1.0 : 0.0;
  return (mi - emi) / denom;
}

double ari(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  Contingency c = contingency(a, b);
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (std::size_t i = 0; i < c.a.size(); ++i)
    for (std::size_t j = 0; j < c.b.size(); ++j) sum_ij += choose2(c.n[i][j]);
  for (double v : c.a) sum_a += choose2(v);
  for (double v : c.b) sum_b += choose2(v);
  double expected = sum_a * sum_b / choose2(c.total);
  double max_index = 0.5 * (sum_a + sum_b);
  double denom = max_index - expected;
  if (std::fabs(denom) < 1e-12) return partitions_equal(a, b) ? 1.0 : 0.0;
  return (sum_ij - expected) / denom;
}

ClusterEval cluster_eval(const std::vector<Matrix>& predictions,
                         const std::vector<std::string>& cancer_labels, std::uint64_t seed) {
  if (predictions.size() != cancer_labels.size())
    throw std::invalid_argument("cluster_eval: one label per slide required");
  if (predictions.size() < 2) throw std::invalid_argument("cluster_eval: need at least 2 slides");

  std::map<std::string, std::size_t> label_index;
  for (const std::string& l : cancer_labels) label_index.emplace(l, label_index.size());
  if (label_index.size() < 2)
    throw std::invalid_argument("cluster_eval: need at least two cancer types");

  const std::size_t g = predictions[0].cols();
  Matrix profiles(predictions.size(), g);
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const Matrix& p = predictions[s];
    if (p.cols() != g) throw std::invalid_argument("cluster_eval: gene count mismatch");
    for (std::size_t r = 0; r < p.rows(); ++r)
      for (std::size_t c = 0; c < g; ++c) profiles(s, c) += p(r, c);
    for (std::size_t c = 0; c < g; ++c) profiles(s, c) /= static_cast<double>(p.rows());
  }

  ClusterEval eval;
  eval.k = label_index.size();
  eval.seed = seed;
  KmeansResult km = kmeans_cluster(profiles, eval.k, seed);
  eval.labels = km.labels;
  std::vector<std::size_t> truth(cancer_labels.size());
  for (std::size_t i = 0; i < cancer_labels.size(); ++i) truth[i] = label_index[cancer_labels[i]];
  eval.ami = ami(km.labels, truth);
  eval.ari = ari(km.labels, truth);
  return eval;
}

}  // namespace histoprism
