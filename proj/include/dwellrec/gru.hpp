#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dwellrec/param.hpp"
#include "dwellrec/tensor.hpp"

namespace dwellrec {

// Single GRU layer with the standard update/reset/candidate gates:
//
//   z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
//   r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
//   c_t = tanh(x_t W_h + (r_t . h_{t-1}) U_h + b_h)
//   h_t = (1 - z_t) . h_{t-1} + z_t . c_t
//
// where . is elementwise product and the reset gate is applied to h_{t-1}
// before the U_h product.
struct GruCell {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  Param w_z, w_r, w_h;  // input -> hidden, input_size x hidden_size
  Param u_z, u_r, u_h;  // hidden -> hidden, hidden_size x hidden_size
  Param b_z, b_r, b_h;  // bias rows, 1 x hidden_size

  GruCell() = default;
  GruCell(const std::string& name_prefix, std::size_t input, std::size_t hidden);

  std::array<Param*, 9> params();
  std::array<const Param*, 9> params() const;
};

// Per-row activity masks, one vector per step. A row whose mask entry is 0 at
// step t carries h_{t-1} through unchanged; its gate activations for that
// step contribute nothing to outputs or gradients. Used by the models to keep
// left-padded positions from perturbing the hidden state.
using StepMasks = std::vector<std::vector<std::uint8_t>>;

// Cached activations from one forward pass, everything the backward pass
// needs. steps[t].h is the hidden sequence.
struct GruTrace {
  Tensor2 h0;
  struct Step {
    Tensor2 x;       // batch x input_size
    Tensor2 z, r;    // gates, batch x hidden_size
    Tensor2 c;       // candidate state
    Tensor2 h;       // hidden state after the step
  };
  std::vector<Step> steps;
  StepMasks masks;  // empty when every row is active at every step

  std::size_t length() const { return steps.size(); }
  const Tensor2& hidden(std::size_t t) const { return steps[t].h; }
  const Tensor2& last_hidden() const { return steps.back().h; }
};

// Runs the cell over an input sequence. Every input must be batch x
// input_size and h0 batch x hidden_size. masks, when given, must have one
// entry per step, each of batch length.
GruTrace gru_forward(const GruCell& cell, std::span<const Tensor2> inputs, const Tensor2& h0,
                     const StepMasks* masks = nullptr);

// Backpropagation through time. d_hidden[t] is the gradient flowing into h_t
// from outside the recurrence (any step may carry one; positions without an
// external consumer pass zero tensors). Accumulates into the nine parameter
// gradients and returns the gradient with respect to each input step.
std::vector<Tensor2> gru_backward(GruCell& cell, const GruTrace& trace,
                                  std::span<const Tensor2> d_hidden);

}  // namespace dwellrec
