#include "dwellrec/gru.hpp"

#include <cmath>

#include "dwellrec/errors.hpp"

namespace dwellrec {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void apply_sigmoid(Tensor2& t) {
  for (double& v : t.flat()) v = sigmoid(v);
}

void apply_tanh(Tensor2& t) {
  for (double& v : t.flat()) v = std::tanh(v);
}

// out = a . b (elementwise), fresh tensor
Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  Tensor2 out(a.rows(), a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
  return out;
}

void add_bias_row(Tensor2& t, const Tensor2& bias) {
  for (std::size_t i = 0; i < t.rows(); ++i) {
    auto row = t.row(i);
    auto b = bias.row(0);
    for (std::size_t j = 0; j < t.cols(); ++j) row[j] += b[j];
  }
}

}  // namespace

GruCell::GruCell(const std::string& name_prefix, std::size_t input, std::size_t hidden)
    : input_size(input),
      hidden_size(hidden),
      w_z(name_prefix + ".w_z", input, hidden),
      w_r(name_prefix + ".w_r", input, hidden),
      w_h(name_prefix + ".w_h", input, hidden),
      u_z(name_prefix + ".u_z", hidden, hidden),
      u_r(name_prefix + ".u_r", hidden, hidden),
      u_h(name_prefix + ".u_h", hidden, hidden),
      b_z(name_prefix + ".b_z", 1, hidden),
      b_r(name_prefix + ".b_r", 1, hidden),
      b_h(name_prefix + ".b_h", 1, hidden) {}

std::array<Param*, 9> GruCell::params() {
  return {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &b_z, &b_r, &b_h};
}

std::array<const Param*, 9> GruCell::params() const {
  return {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &b_z, &b_r, &b_h};
}

GruTrace gru_forward(const GruCell& cell, std::span<const Tensor2> inputs, const Tensor2& h0,
                     const StepMasks* masks) {
  const std::size_t batch = h0.rows();
  require_shape(h0, batch, cell.hidden_size, "gru_forward h0");
  if (masks && masks->size() != inputs.size()) {
    throw ShapeError("gru_forward: mask count does not match sequence length");
  }

  GruTrace trace;
  trace.h0 = h0;
  if (masks) trace.masks = *masks;
  trace.steps.reserve(inputs.size());

  const Tensor2* h_prev = &trace.h0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const Tensor2& x = inputs[t];
    require_shape(x, batch, cell.input_size, "gru_forward input step " + std::to_string(t));

    GruTrace::Step step;
    step.x = x;

    step.z = Tensor2(batch, cell.hidden_size);
    gemm(step.z, x, false, cell.w_z.value, false);
    gemm(step.z, *h_prev, false, cell.u_z.value, false, 1.0, 1.0);
    add_bias_row(step.z, cell.b_z.value);
    apply_sigmoid(step.z);

    step.r = Tensor2(batch, cell.hidden_size);
    gemm(step.r, x, false, cell.w_r.value, false);
    gemm(step.r, *h_prev, false, cell.u_r.value, false, 1.0, 1.0);
    add_bias_row(step.r, cell.b_r.value);
    apply_sigmoid(step.r);

    Tensor2 gated = hadamard(step.r, *h_prev);
    step.c = Tensor2(batch, cell.hidden_size);
    gemm(step.c, x, false, cell.w_h.value, false);
    gemm(step.c, gated, false, cell.u_h.value, false, 1.0, 1.0);
    add_bias_row(step.c, cell.b_h.value);
    apply_tanh(step.c);

    step.h = Tensor2(batch, cell.hidden_size);
    for (std::size_t i = 0; i < batch; ++i) {
      const bool active = !masks || (*masks)[t][i];
      auto h = step.h.row(i);
      auto hp = h_prev->row(i);
      if (active) {
        auto z = step.z.row(i);
        auto c = step.c.row(i);
        for (std::size_t j = 0; j < cell.hidden_size; ++j) {
          h[j] = (1.0 - z[j]) * hp[j] + z[j] * c[j];
        }
      } else {
        for (std::size_t j = 0; j < cell.hidden_size; ++j) h[j] = hp[j];
      }
    }

    trace.steps.push_back(std::move(step));
    h_prev = &trace.steps.back().h;
  }
  return trace;
}

std::vector<Tensor2> gru_backward(GruCell& cell, const GruTrace& trace,
                                  std::span<const Tensor2> d_hidden) {
  if (d_hidden.size() != trace.length()) {
    throw ShapeError("gru_backward: d_hidden length " + std::to_string(d_hidden.size()) +
                     " does not match trace length " + std::to_string(trace.length()));
  }
  const std::size_t batch = trace.h0.rows();
  const std::size_t hidden = cell.hidden_size;
  const bool masked = !trace.masks.empty();

  std::vector<Tensor2> d_inputs(trace.length());
  Tensor2 d_h_next(batch, hidden);  // gradient arriving from step t+1

  for (std::size_t ti = trace.length(); ti-- > 0;) {
    const GruTrace::Step& step = trace.steps[ti];
    require_shape(d_hidden[ti], batch, hidden, "gru_backward d_hidden step " + std::to_string(ti));
    const Tensor2& h_prev = (ti == 0) ? trace.h0 : trace.steps[ti - 1].h;

    // Total gradient on h_t; masked rows route it straight to h_{t-1}.
    Tensor2 g = d_hidden[ti];
    add_inplace(g, d_h_next);
    Tensor2 d_h_prev(batch, hidden);
    if (masked) {
      for (std::size_t i = 0; i < batch; ++i) {
        if (!trace.masks[ti][i]) {
          auto gr = g.row(i);
          auto dp = d_h_prev.row(i);
          for (std::size_t j = 0; j < hidden; ++j) {
            dp[j] = gr[j];
            gr[j] = 0.0;
          }
        }
      }
    }

    // h_t = (1-z).h_prev + z.c
    Tensor2 d_z(batch, hidden);
    Tensor2 d_c(batch, hidden);
    {
      const double* pg = g.data();
      const double* pz = step.z.data();
      const double* pc = step.c.data();
      const double* php = h_prev.data();
      double* pdz = d_z.data();
      double* pdc = d_c.data();
      double* pdh = d_h_prev.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        pdz[i] = pg[i] * (pc[i] - php[i]);
        pdc[i] = pg[i] * pz[i];
        pdh[i] += pg[i] * (1.0 - pz[i]);
      }
    }

    // c = tanh(a_c), a_c = x W_h + (r.h_prev) U_h + b_h
    Tensor2 d_ac = std::move(d_c);
    {
      const double* pc = step.c.data();
      double* p = d_ac.data();
      for (std::size_t i = 0; i < d_ac.size(); ++i) p[i] *= (1.0 - pc[i] * pc[i]);
    }
    Tensor2 gated = hadamard(step.r, h_prev);
    gemm(cell.w_h.grad, step.x, true, d_ac, false, 1.0, 1.0);
    gemm(cell.u_h.grad, gated, true, d_ac, false, 1.0, 1.0);
    accumulate_colsum(cell.b_h.grad, d_ac);

    Tensor2 d_gated(batch, hidden);
    gemm(d_gated, d_ac, false, cell.u_h.value, true);
    Tensor2 d_r = hadamard(d_gated, h_prev);
    {
      const double* pdg = d_gated.data();
      const double* pr = step.r.data();
      double* pdh = d_h_prev.data();
      for (std::size_t i = 0; i < d_gated.size(); ++i) pdh[i] += pdg[i] * pr[i];
    }

    // gate pre-activations through the sigmoid derivative
    Tensor2 d_az = std::move(d_z);
    {
      const double* pz = step.z.data();
      double* p = d_az.data();
      for (std::size_t i = 0; i < d_az.size(); ++i) p[i] *= pz[i] * (1.0 - pz[i]);
    }
    Tensor2 d_ar = std::move(d_r);
    {
      const double* pr = step.r.data();
      double* p = d_ar.data();
      for (std::size_t i = 0; i < d_ar.size(); ++i) p[i] *= pr[i] * (1.0 - pr[i]);
    }

    gemm(cell.w_z.grad, step.x, true, d_az, false, 1.0, 1.0);
    gemm(cell.u_z.grad, h_prev, true, d_az, false, 1.0, 1.0);
    accumulate_colsum(cell.b_z.grad, d_az);
    gemm(cell.w_r.grad, step.x, true, d_ar, false, 1.0, 1.0);
    gemm(cell.u_r.grad, h_prev, true, d_ar, false, 1.0, 1.0);
    accumulate_colsum(cell.b_r.grad, d_ar);

    Tensor2 d_x(batch, cell.input_size);
    gemm(d_x, d_az, false, cell.w_z.value, true);
    gemm(d_x, d_ar, false, cell.w_r.value, true, 1.0, 1.0);
    gemm(d_x, d_ac, false, cell.w_h.value, true, 1.0, 1.0);
    d_inputs[ti] = std::move(d_x);

    gemm(d_h_prev, d_az, false, cell.u_z.value, true, 1.0, 1.0);
    gemm(d_h_prev, d_ar, false, cell.u_r.value, true, 1.0, 1.0);
    d_h_next = std::move(d_h_prev);
  }
  return d_inputs;
}

}  // namespace dwellrec
