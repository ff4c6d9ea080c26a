#pragma once

#include <cstdint>
#include <span>

#include "dwellrec/param.hpp"
#include "dwellrec/tensor.hpp"

namespace dwellrec {

// Gathers rows of the embedding table: output row j is table.value row
// ids[j]. Throws IndexError naming the offending id.
Tensor2 embedding_forward(const Param& table, std::span<const std::int32_t> ids);

// Scatters d_out back: table.grad row r accumulates the sum of d_out rows j
// with ids[j] == r.
void embedding_backward(Param& table, std::span<const std::int32_t> ids, const Tensor2& d_out);

// logits = h W + b, broadcast bias row.
Tensor2 affine_forward(const Tensor2& h, const Tensor2& w, const Tensor2& b);

// Given softmax probabilities and targets, accumulates the cross-entropy
// gradients into w and b (using the pre-activation input h) and returns the
// mean negative log-likelihood. d_h receives the gradient w.r.t. h.
double softmax_xent_backward(const Tensor2& probs, std::span<const std::int32_t> targets,
                             Param& w, Param& b, const Tensor2& h, Tensor2& d_h);

struct AffineSoftmaxResult {
  double loss = 0.0;
  Tensor2 probs;  // batch x classes, rows sum to 1
  Tensor2 d_h;    // batch x input
};

// Fused output layer: logits = h W + b, stable softmax, mean cross-entropy
// against targets. Accumulates gradients for w and b and returns the
// gradient w.r.t. h.
AffineSoftmaxResult affine_softmax_xent(Param& w, Param& b, const Tensor2& h,
                                        std::span<const std::int32_t> targets);

}  // namespace dwellrec
