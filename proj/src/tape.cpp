#include "histoprism/tape.hpp"

#include <cmath>

namespace histoprism {

namespace {
constexpr double kGeluCoeff = 0.044715;
constexpr double kSqrt2OverPi = 0.7978845608028653558798921198687;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}
}  // namespace

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::int32_t>(nodes_.size() - 1)};
}

NodeId Tape::leaf(Matrix v) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::constant(Matrix v) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Matrix& A = val(a.idx);
  const Matrix& B = val(b.idx);
  require(A.cols() == B.rows(),
          "matmul: dimension mismatch " + A.shape_str() + " * " + B.shape_str());
  macs_ += static_cast<std::uint64_t>(A.rows()) * A.cols() * B.cols();
  Node n;
  n.op = Op::MatMul;
  n.a = a.idx;
  n.b = b.idx;
  n.value = histoprism::matmul(A, B);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Matrix& A = val(a.idx);
  const Matrix& B = val(b.idx);
  Node n;
  n.a = a.idx;
  n.b = b.idx;
  if (A.same_shape(B)) {
    n.op = Op::Add;
    Matrix out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += B.data()[i];
    n.value = std::move(out);
  } else if (B.rows() == 1 && B.cols() == A.cols()) {
    n.op = Op::AddRowBroadcast;
    Matrix out = A;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      double* orow = out.row_ptr(r);
      const double* brow = B.row_ptr(0);
      for (std::size_t c = 0; c < out.cols(); ++c) orow[c] += brow[c];
    }
    n.value = std::move(out);
  } else {
    throw std::invalid_argument("add: shape mismatch " + A.shape_str() + " + " + B.shape_str());
  }
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
  Node n;
  n.op = Op::Scale;
  n.a = a.idx;
  n.scalar = factor;
  Matrix out = val(a.idx);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= factor;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::softmax_rows(NodeId a) {
  const Matrix& A = val(a.idx);
  Matrix out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const double* in = A.row_ptr(r);
    double* o = out.row_ptr(r);
    double mx = in[0];
    for (std::size_t c = 1; c < A.cols(); ++c) mx = std::max(mx, in[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < A.cols(); ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (std::size_t c = 0; c < A.cols(); ++c) o[c] /= sum;
  }
  if (!out.all_finite()) throw std::runtime_error("softmax_rows: non-finite output");
  Node n;
  n.op = Op::SoftmaxRows;
  n.a = a.idx;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
  const Matrix& X = val(x.idx);
  const Matrix& G = val(gain.idx);
  const Matrix& B = val(bias.idx);
  require(eps > 0.0, "layer_norm: eps must be positive");
  require(G.rows() == 1 && B.rows() == 1 && G.cols() == X.cols() && B.cols() == X.cols(),
          "layer_norm: gain/bias must be 1x" + std::to_string(X.cols()));
  const std::size_t d = X.cols();
  Matrix out(X.rows(), d);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const double* in = X.row_ptr(r);
    double* o = out.row_ptr(r);
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += in[c];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      double dv = in[c] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c)
      o[c] = (in[c] - mean) * inv * G(0, c) + B(0, c);
  }
  if (!out.all_finite()) throw std::runtime_error("layer_norm: non-finite output");
  Node n;
  n.op = Op::LayerNorm;
  n.a = x.idx;
  n.b = gain.idx;
  n.c = bias.idx;
  n.scalar = eps;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::gelu(NodeId a) {
  Matrix out = val(a.idx);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = out.data()[i];
    double t = std::tanh(kSqrt2OverPi * (x + kGeluCoeff * x * x * x));
    out.data()[i] = 0.5 * x * (1.0 + t);
  }
  Node n;
  n.op = Op::Gelu;
  n.a = a.idx;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
  const Matrix& A = val(a.idx);
  Matrix out(A.cols(), A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = 0; c < A.cols(); ++c) out(c, r) = A(r, c);
  Node n;
  n.op = Op::Transpose;
  n.a = a.idx;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::slice(NodeId a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  const Matrix& A = val(a.idx);
  require(r0 < r1 && r1 <= A.rows() && c0 < c1 && c1 <= A.cols(),
          "slice: bounds outside " + A.shape_str());
  Matrix out(r1 - r0, c1 - c0);
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) out(r - r0, c - c0) = A(r, c);
  Node n;
  n.op = Op::Slice;
  n.a = a.idx;
  n.r0 = r0;
  n.r1 = r1;
  n.c0 = c0;
  n.c1 = c1;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::mean_all(NodeId a) {
  const Matrix& A = val(a.idx);
  require(A.size() > 0, "mean_all: empty matrix");
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A.data()[i];
  Matrix out(1, 1);
  out(0, 0) = s / static_cast<double>(A.size());
  Node n;
  n.op = Op::Mean;
  n.a = a.idx;
  n.value = std::move(out);
  return push(std::move(n));
}

NodeId Tape::square(NodeId a) {
  Matrix out = val(a.idx);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= out.data()[i];
  Node n;
  n.op = Op::Square;
  n.a = a.idx;
  n.value = std::move(out);
  return push(std::move(n));
}

void Tape::backward(NodeId root) {
  require(root.valid() && static_cast<std::size_t>(root.idx) < nodes_.size(),
          "backward: invalid root");
  require(nodes_[root.idx].value.rows() == 1 && nodes_[root.idx].value.cols() == 1,
          "backward: root must be a 1x1 scalar");

  for (Node& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_[root.idx].grad(0, 0) = 1.0;

  for (std::int32_t i = root.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::MatMul: {
        const Matrix& A = nodes_[n.a].value;
        const Matrix& B = nodes_[n.b].value;
        Matrix& dA = nodes_[n.a].grad;
        Matrix& dB = nodes_[n.b].grad;
        // dA += g * B^T : dA(i,k) += sum_j g(i,j) B(k,j)
        for (std::size_t r = 0; r < A.rows(); ++r) {
          const double* grow = g.row_ptr(r);
          double* darow = dA.row_ptr(r);
          for (std::size_t k = 0; k < A.cols(); ++k) {
            const double* brow = B.row_ptr(k);
            double acc = 0.0;
            for (std::size_t j = 0; j < B.cols(); ++j) acc += grow[j] * brow[j];
            darow[k] += acc;
          }
        }
        // dB += A^T * g : dB(k,j) += sum_i A(i,k) g(i,j)
        for (std::size_t r = 0; r < A.rows(); ++r) {
          const double* arow = A.row_ptr(r);
          const double* grow = g.row_ptr(r);
          for (std::size_t k = 0; k < A.cols(); ++k) {
            double av = arow[k];
            double* dbrow = dB.row_ptr(k);
            for (std::size_t j = 0; j < B.cols(); ++j) dbrow[j] += av * grow[j];
          }
        }
        break;
      }
      case Op::Add: {
        Matrix& dA = nodes_[n.a].grad;
        Matrix& dB = nodes_[n.b].grad;
        for (std::size_t k = 0; k < g.size(); ++k) {
          dA.data()[k] += g.data()[k];
          dB.data()[k] += g.data()[k];
        }
        break;
      }
      case Op::AddRowBroadcast: {
        Matrix& dA = nodes_[n.a].grad;
        Matrix& dB = nodes_[n.b].grad;
        for (std::size_t k = 0; k < g.size(); ++k) dA.data()[k] += g.data()[k];
        for (std::size_t r = 0; r < g.rows(); ++r) {
          const double* grow = g.row_ptr(r);
          double* dbrow = dB.row_ptr(0);
          for (std::size_t c = 0; c < g.cols(); ++c) dbrow[c] += grow[c];
        }
        break;
      }
      case Op::Scale: {
        Matrix& dA = nodes_[n.a].grad;
        for (std::size_t k = 0; k < g.size(); ++k) dA.data()[k] += n.scalar * g.data()[k];
        break;
      }
      case Op::SoftmaxRows: {
        // dx_i = y_i * (g_i - sum_j g_j y_j) per row
        Matrix& dA = nodes_[n.a].grad;
        const Matrix& y = n.value;
        for (std::size_t r = 0; r < y.rows(); ++r) {
          const double* yrow = y.row_ptr(r);
          const double* grow = g.row_ptr(r);
          double dot = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) dot += grow[c] * yrow[c];
          double* darow = dA.row_ptr(r);
          for (std::size_t c = 0; c < y.cols(); ++c)
            darow[c] += yrow[c] * (grow[c] - dot);
        }
        break;
      }
      case Op::LayerNorm: {
        const Matrix& X = nodes_[n.a].value;
        const Matrix& G = nodes_[n.b].value;
        Matrix& dX = nodes_[n.a].grad;
        Matrix& dG = nodes_[n.b].grad;
        Matrix& dB = nodes_[n.c].grad;
        const std::size_t d = X.cols();
        const double dn = static_cast<double>(d);
        for (std::size_t r = 0; r < X.rows(); ++r) {
          const double* in = X.row_ptr(r);
          const double* grow = g.row_ptr(r);
          double mean = 0.0;
          for (std::size_t c = 0; c < d; ++c) mean += in[c];
          mean /= dn;
          double var = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            double dv = in[c] - mean;
            var += dv * dv;
          }
          var /= dn;
          double inv = 1.0 / std::sqrt(var + n.scalar);
          // dxhat, and the two row-level reductions the gradient needs
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            double xhat = (in[c] - mean) * inv;
            double dxhat = grow[c] * G(0, c);
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
            dG(0, c) += grow[c] * xhat;
            dB(0, c) += grow[c];
          }
          double* dxrow = dX.row_ptr(r);
          for (std::size_t c = 0; c < d; ++c) {
            double xhat = (in[c] - mean) * inv;
            double dxhat = grow[c] * G(0, c);
            dxrow[c] += inv * (dxhat - sum_dxhat / dn - xhat * sum_dxhat_xhat / dn);
          }
        }
        break;
      }
      case Op::Gelu: {
        const Matrix& X = nodes_[n.a].value;
        Matrix& dA = nodes_[n.a].grad;
        for (std::size_t k = 0; k < X.size(); ++k) {
          double x = X.data()[k];
          double u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
          double t = std::tanh(u);
          double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
          double dact = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
          dA.data()[k] += g.data()[k] * dact;
        }
        break;
      }
      case Op::Transpose: {
        Matrix& dA = nodes_[n.a].grad;
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) dA(c, r) += g(r, c);
        break;
      }
      case Op::Slice: {
        Matrix& dA = nodes_[n.a].grad;
        for (std::size_t r = n.r0; r < n.r1; ++r)
          for (std::size_t c = n.c0; c < n.c1; ++c) dA(r, c) += g(r - n.r0, c - n.c0);
        break;
      }
      case Op::Mean: {
        Matrix& dA = nodes_[n.a].grad;
        double gv = g(0, 0) / static_cast<double>(dA.size());
        for (std::size_t k = 0; k < dA.size(); ++k) dA.data()[k] += gv;
        break;
      }
      case Op::Square: {
        const Matrix& X = nodes_[n.a].value;
        Matrix& dA = nodes_[n.a].grad;
        for (std::size_t k = 0; k < X.size(); ++k)
          dA.data()[k] += 2.0 * X.data()[k] * g.data()[k];
        break;
      }
    }
  }
}

}  // namespace histoprism
