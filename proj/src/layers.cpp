#include "dwellrec/layers.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "dwellrec/errors.hpp"

namespace dwellrec {

Tensor2 embedding_forward(const Param& table, std::span<const std::int32_t> ids) {
  const std::size_t dim = table.value.cols();
  Tensor2 out(ids.size(), dim);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const std::int32_t id = ids[j];
    if (id < 0 || static_cast<std::size_t>(id) >= table.value.rows()) {
      throw IndexError("embedding_forward: id " + std::to_string(id) + " out of range for table " +
                       table.name + " with " + std::to_string(table.value.rows()) + " rows");
    }
    std::memcpy(out.row(j).data(), table.value.row(static_cast<std::size_t>(id)).data(),
                dim * sizeof(double));
  }
  return out;
}

void embedding_backward(Param& table, std::span<const std::int32_t> ids, const Tensor2& d_out) {
  if (d_out.rows() != ids.size() || d_out.cols() != table.value.cols()) {
    throw ShapeError("embedding_backward: d_out is " + std::to_string(d_out.rows()) + "x" +
                     std::to_string(d_out.cols()) + ", expected " + std::to_string(ids.size()) +
                     "x" + std::to_string(table.value.cols()));
  }
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const std::int32_t id = ids[j];
    if (id < 0 || static_cast<std::size_t>(id) >= table.value.rows()) {
      throw IndexError("embedding_backward: id " + std::to_string(id) + " out of range");
    }
    auto grad_row = table.grad.row(static_cast<std::size_t>(id));
    auto d = d_out.row(j);
    for (std::size_t c = 0; c < grad_row.size(); ++c) grad_row[c] += d[c];
  }
}

Tensor2 affine_forward(const Tensor2& h, const Tensor2& w, const Tensor2& b) {
  if (h.cols() != w.rows()) {
    throw ShapeError("affine_forward: h cols " + std::to_string(h.cols()) +
                     " do not match W rows " + std::to_string(w.rows()));
  }
  require_shape(b, 1, w.cols(), "affine_forward bias");
  Tensor2 logits(h.rows(), w.cols());
  gemm(logits, h, false, w, false);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    auto bias = b.row(0);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
  return logits;
}

double softmax_xent_backward(const Tensor2& probs, std::span<const std::int32_t> targets,
                             Param& w, Param& b, const Tensor2& h, Tensor2& d_h) {
  const std::size_t batch = probs.rows();
  if (targets.size() != batch) {
    throw ShapeError("softmax_xent_backward: " + std::to_string(targets.size()) +
                     " targets for batch of " + std::to_string(batch));
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);

  double loss = 0.0;
  Tensor2 d_logits = probs;
  for (std::size_t j = 0; j < batch; ++j) {
    const std::int32_t t = targets[j];
    if (t < 0 || static_cast<std::size_t>(t) >= probs.cols()) {
      throw IndexError("softmax_xent_backward: target " + std::to_string(t) +
                       " out of range for " + std::to_string(probs.cols()) + " classes");
    }
    loss -= std::log(probs(j, static_cast<std::size_t>(t)));
    d_logits(j, static_cast<std::size_t>(t)) -= 1.0;
  }
  loss *= inv_batch;
  for (double& v : d_logits.flat()) v *= inv_batch;

  gemm(w.grad, h, true, d_logits, false, 1.0, 1.0);
  accumulate_colsum(b.grad, d_logits);
  d_h = Tensor2(batch, w.value.rows());
  gemm(d_h, d_logits, false, w.value, true);
  return loss;
}

AffineSoftmaxResult affine_softmax_xent(Param& w, Param& b, const Tensor2& h,
                                        std::span<const std::int32_t> targets) {
  AffineSoftmaxResult res;
  res.probs = softmax_rows(affine_forward(h, w.value, b.value));
  res.loss = softmax_xent_backward(res.probs, targets, w, b, h, res.d_h);
  return res;
}

}  // namespace dwellrec
