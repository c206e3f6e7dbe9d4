#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "histoprism/gradcheck.hpp"
#include "histoprism/matrix.hpp"
#include "histoprism/rng.hpp"
#include "histoprism/tape.hpp"

using namespace histoprism;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.next_gaussian();
  return m;
}

// independent triple-loop product, kept deliberately naive
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.same_shape(b));
  double mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::fabs(a.data()[i] - b.data()[i]));
  return mx;
}

}  // namespace

TEST_CASE("matmul: identity passes through") {
  Rng rng(11);
  Matrix a = random_matrix(3, 5, rng);
  CHECK(max_abs_diff(matmul(Matrix::identity(3), a), a) == 0.0);
}

TEST_CASE("matmul: hand-checkable 2x2 by 2x1") {
  Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix b = Matrix::from_rows({{0}, {1}});
  Matrix c = matmul(a, b);
  CHECK(c(0, 0) == 2.0);
  CHECK(c(1, 0) == 4.0);
}

TEST_CASE("matmul: random 5x7 * 7x3 matches naive oracle") {
  Rng rng(42);
  Matrix a = random_matrix(5, 7, rng);
  Matrix b = random_matrix(7, 3, rng);
  CHECK(max_abs_diff(matmul(a, b), matmul_oracle(a, b)) < 1e-12);
}

TEST_CASE("matmul: dimension mismatch reports both shapes") {
  Matrix a(2, 3), b(4, 2);
  CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: dimension mismatch 2x3 * 4x2",
                       std::invalid_argument);
}

TEST_CASE("matmul: associativity on random conformable triples") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n1 = 1 + rng.next_below(6), n2 = 1 + rng.next_below(6);
    std::size_t n3 = 1 + rng.next_below(6), n4 = 1 + rng.next_below(6);
    Matrix a = random_matrix(n1, n2, rng);
    Matrix b = random_matrix(n2, n3, rng);
    Matrix c = random_matrix(n3, n4, rng);
    Matrix left = matmul(matmul(a, b), c);
    Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      double denom = std::max({std::fabs(left.data()[i]), std::fabs(right.data()[i]), 1.0});
      CHECK(std::fabs(left.data()[i] - right.data()[i]) / denom < 1e-9);
    }
  }
}

TEST_CASE("softmax_rows: single column is exactly one") {
  Tape t;
  Matrix a = Matrix::from_rows({{3.7}, {-120.0}, {0.0}});
  const Matrix& out = t.value(t.softmax_rows(t.constant(a)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(out(i, 0) == 1.0);
}

TEST_CASE("softmax_rows: symmetric row splits evenly") {
  Tape t;
  const Matrix& out = t.value(t.softmax_rows(t.constant(Matrix::from_rows({{0.0, 0.0}}))));
  CHECK(out(0, 0) == 0.5);
  CHECK(out(0, 1) == 0.5);
}

TEST_CASE("softmax_rows: huge logits stay finite and match long-double oracle") {
  Tape t;
  const Matrix& out = t.value(t.softmax_rows(t.constant(Matrix::from_rows({{1000.0, 0.0}}))));
  // extended-precision reference
  long double e0 = expl(0.0L), e1 = expl(-1000.0L);
  long double p0 = e0 / (e0 + e1);
  CHECK(std::isfinite(out(0, 0)));
  CHECK(std::fabs(out(0, 0) - static_cast<double>(p0)) < 1e-15);
  CHECK(out(0, 1) < 1e-300);
}

TEST_CASE("softmax_rows: rows sum to one and are shift-invariant") {
  Rng rng(5);
  Matrix a = random_matrix(6, 9, rng, 3.0);
  Matrix shifted = a;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double c = rng.uniform(-50.0, 50.0);
    for (std::size_t j = 0; j < a.cols(); ++j) shifted(r, j) += c;
  }
  Tape t;
  Matrix s1 = t.value(t.softmax_rows(t.constant(a)));
  Matrix s2 = t.value(t.softmax_rows(t.constant(shifted)));
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      sum += s1(r, j);
      CHECK(s1(r, j) > 0.0);
      CHECK(s1(r, j) <= 1.0);
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
  CHECK(max_abs_diff(s1, s2) <= 1e-12);
}

TEST_CASE("layer_norm: constant row collapses to bias") {
  Tape t;
  Matrix x(1, 4, 2.5);
  NodeId out = t.layer_norm(t.constant(x), t.constant(Matrix(1, 4, 1.0)),
                            t.constant(Matrix(1, 4, 0.0)), 1e-5);
  for (std::size_t j = 0; j < 4; ++j) CHECK(t.value(out)(0, j) == 0.0);
}

TEST_CASE("layer_norm: two-element row normalizes to +-1 up to eps") {
  Tape t;
  NodeId out = t.layer_norm(t.constant(Matrix::from_rows({{1.0, 3.0}})),
                            t.constant(Matrix(1, 2, 1.0)), t.constant(Matrix(1, 2, 0.0)), 1e-5);
  CHECK(t.value(out)(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(t.value(out)(0, 1) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm: random rows have near-zero mean and eps-adjusted unit variance") {
  Rng rng(19);
  const double eps = 1e-5;
  Matrix x = random_matrix(4, 8, rng, 2.0);
  Tape t;
  const Matrix& out = t.value(t.layer_norm(t.constant(x), t.constant(Matrix(1, 8, 1.0)),
                                           t.constant(Matrix(1, 8, 0.0)), eps));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mean += out(r, j);
    mean /= 8.0;
    CHECK(std::fabs(mean) < 1e-10);
    double var = 0.0;
    for (std::size_t j = 0; j < 8; ++j) var += (out(r, j) - mean) * (out(r, j) - mean);
    var /= 8.0;
    // direct moment oracle on the input row gives the exact expected ratio
    double m = 0.0, v = 0.0;
    for (std::size_t j = 0; j < 8; ++j) m += x(r, j);
    m /= 8.0;
    for (std::size_t j = 0; j < 8; ++j) v += (x(r, j) - m) * (x(r, j) - m);
    v /= 8.0;
    CHECK(var == doctest::Approx(v / (v + eps)).epsilon(1e-10));
  }
}

TEST_CASE("tape: backward of every primitive matches central finite differences") {
  Rng rng(23);
  // scalar loss built from a chain exercising each op
  auto build_loss = [](const std::vector<Matrix>& tensors, std::vector<Matrix>* grads) {
    Tape t;
    NodeId x = t.leaf(tensors[0]);       // 4x6
    NodeId w = t.leaf(tensors[1]);       // 6x6
    NodeId gain = t.leaf(tensors[2]);    // 1x6
    NodeId bias = t.leaf(tensors[3]);    // 1x6
    NodeId y = t.matmul(x, w);
    y = t.add(y, bias);                  // row broadcast
    y = t.gelu(y);
    y = t.layer_norm(y, gain, bias, 1e-5);
    y = t.softmax_rows(t.scale(y, 0.7));
    NodeId z = t.slice(y, 0, 4, 1, 5);
    z = t.matmul(z, t.transpose(t.slice(y, 0, 2, 0, 4)));
    NodeId loss = t.mean_all(t.square(t.add(z, z)));
    if (grads) {
      t.backward(loss);
      *grads = {t.grad(x), t.grad(w), t.grad(gain), t.grad(bias)};
    }
    return t.value(loss)(0, 0);
  };
  std::vector<Matrix> tensors = {random_matrix(4, 6, rng), random_matrix(6, 6, rng, 0.5),
                                 random_matrix(1, 6, rng, 0.3), random_matrix(1, 6, rng, 0.3)};
  for (std::size_t i = 0; i < tensors[2].size(); ++i) tensors[2].data()[i] += 1.0;
  GradCheckReport report = check_gradients(build_loss, tensors, {"x", "w", "gain", "bias"}, 8,
                                           1e-5, 99);
  CHECK(report.worst_rel_err() < 1e-6);
}

TEST_CASE("tape: matmul backward matches finite differences on random shapes up to 8x8") {
  Rng rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    std::size_t n = 1 + rng.next_below(8), k = 1 + rng.next_below(8), m = 1 + rng.next_below(8);
    auto loss = [](const std::vector<Matrix>& tensors, std::vector<Matrix>* grads) {
      Tape t;
      NodeId a = t.leaf(tensors[0]);
      NodeId b = t.leaf(tensors[1]);
      NodeId l = t.mean_all(t.square(t.matmul(a, b)));
      if (grads) {
        t.backward(l);
        *grads = {t.grad(a), t.grad(b)};
      }
      return t.value(l)(0, 0);
    };
    std::vector<Matrix> tensors = {random_matrix(n, k, rng), random_matrix(k, m, rng)};
    GradCheckReport report = check_gradients(loss, tensors, {"a", "b"}, 4, 1e-5, trial);
    CHECK(report.worst_rel_err() < 1e-6);
  }
}

TEST_CASE("tape: replaying backward twice is bit-identical") {
  Rng rng(57);
  Tape t;
  NodeId a = t.leaf(random_matrix(5, 5, rng));
  NodeId b = t.leaf(random_matrix(5, 5, rng));
  NodeId loss = t.mean_all(t.square(t.softmax_rows(t.matmul(a, b))));
  t.backward(loss);
  Matrix ga = t.grad(a), gb = t.grad(b);
  t.backward(loss);
  CHECK(t.grad(a) == ga);
  CHECK(t.grad(b) == gb);
}

TEST_CASE("tape: gradients accumulate additively for shared inputs") {
  Tape t;
  NodeId a = t.leaf(Matrix::from_rows({{2.0}}));
  NodeId loss = t.mean_all(t.add(a, a));  // d/da (2a) = 2
  t.backward(loss);
  CHECK(t.grad(a)(0, 0) == 2.0);
}

TEST_CASE("check_gradients: quadratic loss has gradient equal to the weights") {
  Rng rng(3);
  auto loss = [](const std::vector<Matrix>& tensors, std::vector<Matrix>* grads) {
    Tape t;
    NodeId w = t.leaf(tensors[0]);
    // 0.5 * ||W||^2 == mean(square(W)) * size / 2
    NodeId l = t.scale(t.mean_all(t.square(w)), static_cast<double>(tensors[0].size()) / 2.0);
    if (grads) {
      t.backward(l);
      *grads = {t.grad(w)};
    }
    return t.value(l)(0, 0);
  };
  // entries bounded away from zero keep the finite-difference quotient
  // well conditioned at the 1e-8 scale
  Matrix w(4, 5);
  for (std::size_t i = 0; i < w.size(); ++i) {
    double g = rng.next_gaussian();
    w.data()[i] = (g < 0 ? -1.0 : 1.0) * (0.5 + std::fabs(g));
  }
  std::vector<Matrix> tensors = {w};
  GradCheckReport report = check_gradients(loss, tensors, {"w"}, 10, 1e-4, 1);
  CHECK(report.worst_rel_err() < 1e-8);
  CHECK(report.entries[0].probes_checked == 10);
  CHECK(report.entries[0].probes_skipped == 0);
}

TEST_CASE("check_gradients: linear-model MSE matches the closed-form gradient") {
  Rng rng(13);
  Matrix x = random_matrix(6, 3, rng);
  Matrix y = random_matrix(6, 2, rng);
  auto loss = [&](const std::vector<Matrix>& tensors, std::vector<Matrix>* grads) {
    Tape t;
    NodeId w = t.leaf(tensors[0]);
    NodeId pred = t.matmul(t.constant(x), w);
    NodeId l = t.mean_all(t.square(t.add(pred, t.scale(t.constant(y), -1.0))));
    if (grads) {
      t.backward(l);
      *grads = {t.grad(w)};
    }
    return t.value(l)(0, 0);
  };
  std::vector<Matrix> tensors = {random_matrix(3, 2, rng)};
  GradCheckReport fd = check_gradients(loss, tensors, {"w"}, 6, 1e-5, 4);
  CHECK(fd.worst_rel_err() < 1e-6);

  // closed-form least-squares gradient oracle: dL/dW = 2/(n*m) X^T (XW - Y)
  std::vector<Matrix> analytic;
  loss(tensors, &analytic);
  Matrix resid = matmul(x, tensors[0]);
  for (std::size_t i = 0; i < resid.size(); ++i) resid.data()[i] -= y.data()[i];
  Matrix xt(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) xt(c, r) = x(r, c);
  Matrix expected = matmul(xt, resid);
  const double scale = 2.0 / static_cast<double>(y.size());
  for (std::size_t i = 0; i < expected.size(); ++i) expected.data()[i] *= scale;
  CHECK(max_abs_diff(analytic[0], expected) < 1e-12);
}

TEST_CASE("check_gradients: non-finite loss probes are skipped and counted") {
  auto loss = [](const std::vector<Matrix>& tensors, std::vector<Matrix>* grads) {
    if (grads) *grads = {Matrix(1, 1, 1.0)};
    double v = tensors[0](0, 0);
    if (v > 1.0) return std::numeric_limits<double>::quiet_NaN();
    return v;
  };
  std::vector<Matrix> tensors = {Matrix(1, 1, 1.0)};  // +step crosses into NaN territory
  GradCheckReport report = check_gradients(loss, tensors, {"w"}, 3, 1e-4, 0);
  CHECK(report.entries[0].probes_skipped == 3);
  CHECK(report.entries[0].probes_checked == 0);
}

TEST_CASE("check_gradients: rejects step outside [1e-7, 1e-3]") {
  auto loss = [](const std::vector<Matrix>&, std::vector<Matrix>* grads) {
    if (grads) *grads = {Matrix(1, 1)};
    return 0.0;
  };
  std::vector<Matrix> tensors = {Matrix(1, 1)};
  CHECK_THROWS_AS(check_gradients(loss, tensors, {"w"}, 1, 1e-2, 0), std::invalid_argument);
  CHECK_THROWS_AS(check_gradients(loss, tensors, {"w"}, 1, 1e-8, 0), std::invalid_argument);
}

TEST_CASE("memtrack: matrix buffers are accounted and peak is monotone") {
  memtrack::reset_peak();
  std::uint64_t before = memtrack::current_bytes();
  {
    Matrix big(64, 64);
    CHECK(memtrack::current_bytes() >= before + 64 * 64 * sizeof(double));
    CHECK(memtrack::peak_bytes() >= memtrack::current_bytes());
  }
  CHECK(memtrack::current_bytes() == before);
}
