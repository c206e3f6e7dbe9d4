#include "histoprism/matrix.hpp"

#include <atomic>

namespace histoprism {

namespace memtrack {
namespace {
std::atomic<std::uint64_t> g_current{0};
std::atomic<std::uint64_t> g_peak{0};
}  // namespace

std::uint64_t current_bytes() { return g_current.load(std::memory_order_relaxed); }
std::uint64_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
void reset_peak() { g_peak.store(g_current.load(std::memory_order_relaxed)); }

namespace detail {
void on_alloc(std::size_t bytes) {
  std::uint64_t now = g_current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::uint64_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}
void on_free(std::size_t bytes) { g_current.fetch_sub(bytes, std::memory_order_relaxed); }
}  // namespace detail
}  // namespace memtrack

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m.cols()) throw std::invalid_argument("from_rows: ragged rows");
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: dimension mismatch " + a.shape_str() + " * " +
                                b.shape_str());
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.row_ptr(p);
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
  return std::sqrt(s);
}

}  // namespace histoprism
