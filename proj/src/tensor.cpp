#include "dwellrec/tensor.hpp"

#include <Eigen/Core>
#include <cmath>

#include "dwellrec/errors.hpp"

namespace dwellrec {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EMat>;
using Map = Eigen::Map<EMat>;

ConstMap as_eigen(const Tensor2& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Map as_eigen(Tensor2& t) {
  return Map(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

}  // namespace

bool Tensor2::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const std::string& what) {
  if (t.rows() != rows || t.cols() != cols) {
    throw ShapeError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", got " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
  }
}

void gemm(Tensor2& out, const Tensor2& a, bool trans_a, const Tensor2& b, bool trans_b,
          double alpha, double beta) {
  const std::size_t ar = trans_a ? a.cols() : a.rows();
  const std::size_t ak = trans_a ? a.rows() : a.cols();
  const std::size_t bk = trans_b ? b.cols() : b.rows();
  const std::size_t bc = trans_b ? b.rows() : b.cols();
  if (ak != bk) {
    throw ShapeError("gemm: inner dimensions " + std::to_string(ak) + " and " +
                     std::to_string(bk) + " do not match");
  }
  if (out.rows() != ar || out.cols() != bc) {
    throw ShapeError("gemm: output is " + std::to_string(out.rows()) + "x" +
                     std::to_string(out.cols()) + ", expected " + std::to_string(ar) + "x" +
                     std::to_string(bc));
  }

  auto mo = as_eigen(out);
  auto ma = as_eigen(a);
  auto mb = as_eigen(b);

  if (beta == 0.0) {
    mo.setZero();
  } else if (beta != 1.0) {
    mo *= beta;
  }
  if (!trans_a && !trans_b) {
    mo.noalias() += alpha * (ma * mb);
  } else if (trans_a && !trans_b) {
    mo.noalias() += alpha * (ma.transpose() * mb);
  } else if (!trans_a && trans_b) {
    mo.noalias() += alpha * (ma * mb.transpose());
  } else {
    mo.noalias() += alpha * (ma.transpose() * mb.transpose());
  }
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 out(a.rows(), b.cols());
  gemm(out, a, false, b, false);
  return out;
}

void add_inplace(Tensor2& out, const Tensor2& a) {
  if (!out.same_shape(a)) {
    throw ShapeError("add_inplace: shape mismatch");
  }
  double* o = out.data();
  const double* p = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] += p[i];
}

Tensor2 softmax_rows(const Tensor2& logits) {
  Tensor2 probs(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto in = logits.row(i);
    auto out = probs.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : in) mx = std::max(mx, v);
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    const double inv = 1.0 / sum;
    for (double& v : out) v *= inv;
  }
  return probs;
}

void accumulate_colsum(Tensor2& out, const Tensor2& a) {
  require_shape(out, 1, a.cols(), "accumulate_colsum output");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    auto o = out.row(0);
    for (std::size_t j = 0; j < a.cols(); ++j) o[j] += r[j];
  }
}

}  // namespace dwellrec
