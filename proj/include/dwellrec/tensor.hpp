#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dwellrec {

// Dense row-major matrix of 64-bit floats. The only tensor rank the models
// need; row vectors are 1xN.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Tensor2 zeros(std::size_t rows, std::size_t cols) { return Tensor2(rows, cols); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> flat() { return {data_.data(), data_.size()}; }
  std::span<const double> flat() const { return {data_.data(), data_.size()}; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(0.0); }

  bool same_shape(const Tensor2& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = alpha * op(a) * op(b) + beta * out, op transposing when the flag is
// set. Throws ShapeError on inner/outer dimension mismatch.
void gemm(Tensor2& out, const Tensor2& a, bool trans_a, const Tensor2& b, bool trans_b,
          double alpha = 1.0, double beta = 0.0);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);

// out += a (elementwise), shapes must match.
void add_inplace(Tensor2& out, const Tensor2& a);

// Row-stable softmax: subtracts the row max before exponentiating.
Tensor2 softmax_rows(const Tensor2& logits);

// Accumulates the column sums of a into the 1 x a.cols() row vector out.
void accumulate_colsum(Tensor2& out, const Tensor2& a);

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const std::string& what);

}  // namespace dwellrec
