#include "gkrnn/cell.hpp"

#include <cmath>
#include <stdexcept>

#include "gkrnn/kernels.hpp"

namespace gkrnn {

namespace {

// preact[B, G*N] = x W_ih^T + h W_hh^T + b_ih + b_hh
Tensor preactivations(const CellWeights& w, const Tensor& x, const Tensor& h) {
  const std::size_t batch = x.dim(0);
  const std::size_t gn = gate_count(w.kind) * w.hidden;
  Tensor pre({batch, gn});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < gn; ++j)
      pre.at(b, j) = w.b_ih.value[j] + w.b_hh.value[j];
  kernels::matmul_nt(x.data(), w.W_ih.value.data(), pre.data(), batch,
                     w.input_dim, gn);
  kernels::matmul_nt(h.data(), w.W_hh.value.data(), pre.data(), batch,
                     w.hidden, gn);
  return pre;
}

void check_step_shapes(const CellWeights& w, const Tensor& x_t,
                       const CellState& s) {
  if (x_t.rank() != 2 || x_t.dim(1) != w.input_dim)
    throw std::invalid_argument(
        "plain_step: input width " + Tensor::shape_str(x_t.shape()) +
        " does not match cell input dimension " + std::to_string(w.input_dim));
  if (s.h.dim(0) != x_t.dim(0) || s.h.dim(1) != w.hidden)
    throw std::invalid_argument("plain_step: state/batch shape mismatch");
}

void add_colsum(Tensor& acc, const Tensor& m) {
  for (std::size_t b = 0; b < m.dim(0); ++b)
    for (std::size_t j = 0; j < m.dim(1); ++j) acc[j] += m.at(b, j);
}

}  // namespace

CellWeights::CellWeights(CellKind k, std::size_t d_in, std::size_t n,
                         const std::string& name_prefix)
    : kind(k),
      input_dim(d_in),
      hidden(n),
      W_ih(name_prefix + ".W_ih", Tensor({gate_count(k) * n, d_in})),
      W_hh(name_prefix + ".W_hh", Tensor({gate_count(k) * n, n})),
      b_ih(name_prefix + ".b_ih", Tensor({gate_count(k) * n})),
      b_hh(name_prefix + ".b_hh", Tensor({gate_count(k) * n})) {}

void CellWeights::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (auto* p : {&W_ih, &W_hh})
    for (auto& v : p->value.vec()) v = rng.uniform(-bound, bound);
  b_ih.value.fill(0.0);
  b_hh.value.fill(0.0);
}

CellState CellState::zeros(CellKind kind, std::size_t batch, std::size_t n) {
  CellState s;
  s.h = Tensor({batch, n});
  if (kind == CellKind::LSTM) s.c = Tensor({batch, n});
  return s;
}

StepResult plain_step(const CellWeights& w, const Tensor& x_t,
                      const CellState& s) {
  check_step_shapes(w, x_t, s);
  const std::size_t batch = x_t.dim(0);
  const std::size_t n = w.hidden;

  StepResult res;
  res.trace.x = x_t;
  res.trace.h_prev = s.h;

  if (w.kind == CellKind::LSTM) {
    res.trace.c_prev = s.c;
    Tensor pre = preactivations(w, x_t, s.h);
    Tensor gates({batch, 4 * n});
    Tensor c_new({batch, n});
    Tensor tanh_c({batch, n});
    Tensor h_new({batch, n});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < n; ++j) {
        const double i = sigmoid_scalar(pre.at(b, j));
        const double f = sigmoid_scalar(pre.at(b, n + j));
        const double g = std::tanh(pre.at(b, 2 * n + j));
        const double o = sigmoid_scalar(pre.at(b, 3 * n + j));
        gates.at(b, j) = i;
        gates.at(b, n + j) = f;
        gates.at(b, 2 * n + j) = g;
        gates.at(b, 3 * n + j) = o;
        const double c = f * s.c.at(b, j) + i * g;
        c_new.at(b, j) = c;
        tanh_c.at(b, j) = std::tanh(c);
        h_new.at(b, j) = o * tanh_c.at(b, j);
      }
    }
    res.trace.gates = std::move(gates);
    res.trace.c_new = c_new;
    res.trace.tanh_c = std::move(tanh_c);
    res.state.h = std::move(h_new);
    res.state.c = std::move(c_new);
    return res;
  }

  // GRU: r,z from the joint preactivation; the candidate re-gates the
  // hidden-side linear term with r before tanh.
  Tensor xpart({batch, 3 * n});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < 3 * n; ++j) xpart.at(b, j) = w.b_ih.value[j];
  kernels::matmul_nt(x_t.data(), w.W_ih.value.data(), xpart.data(), batch,
                     w.input_dim, 3 * n);
  Tensor hpart({batch, 3 * n});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < 3 * n; ++j) hpart.at(b, j) = w.b_hh.value[j];
  kernels::matmul_nt(s.h.data(), w.W_hh.value.data(), hpart.data(), batch, n,
                     3 * n);

  Tensor gates({batch, 3 * n});
  Tensor hn_lin({batch, n});
  Tensor h_new({batch, n});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < n; ++j) {
      const double r = sigmoid_scalar(xpart.at(b, j) + hpart.at(b, j));
      const double z = sigmoid_scalar(xpart.at(b, n + j) + hpart.at(b, n + j));
      const double hl = hpart.at(b, 2 * n + j);
      const double nn = std::tanh(xpart.at(b, 2 * n + j) + r * hl);
      gates.at(b, j) = r;
      gates.at(b, n + j) = z;
      gates.at(b, 2 * n + j) = nn;
      hn_lin.at(b, j) = hl;
      h_new.at(b, j) = (1.0 - z) * nn + z * s.h.at(b, j);
    }
  }
  res.trace.gates = std::move(gates);
  res.trace.hn_lin = std::move(hn_lin);
  res.state.h = std::move(h_new);
  return res;
}

Tensor gatekeeper_activation(const CellWeights& w, const Tensor& k_t,
                             const Tensor& h_k_prev) {
  if (w.kind != CellKind::LSTM && w.kind != CellKind::GRU)
    throw std::invalid_argument("gatekeeper_activation: cell kind has no key gate");
  if (k_t.rank() != 2 || k_t.dim(1) != w.input_dim)
    throw std::invalid_argument("gatekeeper_activation: key width mismatch");
  const std::size_t batch = k_t.dim(0);
  const std::size_t n = w.hidden;
  const std::size_t g = key_gate_index(w.kind);

  Tensor gk({batch, n});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = w.b_ih.value[g * n + j] + w.b_hh.value[g * n + j];
      const double* wik = w.W_ih.value.data() + (g * n + j) * w.input_dim;
      for (std::size_t p = 0; p < w.input_dim; ++p) acc += wik[p] * k_t.at(b, p);
      const double* whk = w.W_hh.value.data() + (g * n + j) * n;
      for (std::size_t p = 0; p < n; ++p) acc += whk[p] * h_k_prev.at(b, p);
      gk.at(b, j) = sigmoid_scalar(acc);
    }
  }
  return gk;
}

StepResult gated_step(const CellWeights& w, const Tensor& x_t,
                      const CellState& s, const Tensor& gk_t) {
  StepResult res = plain_step(w, x_t, s);
  const std::size_t batch = res.state.h.dim(0);
  const std::size_t n = w.hidden;
  const bool broadcast = gk_t.rank() == 1;
  if ((broadcast && gk_t.dim(0) != n) ||
      (!broadcast && (gk_t.dim(0) != batch || gk_t.dim(1) != n)))
    throw std::invalid_argument("gated_step: gk_t shape not broadcastable");

  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < n; ++j) {
      const double gk = broadcast ? gk_t[j] : gk_t.at(b, j);
      res.state.h.at(b, j) *= gk;
      if (w.kind == CellKind::LSTM) res.state.c.at(b, j) *= gk;
    }
  return res;
}

StepGrads step_backward(CellWeights& w, const StepTrace& trace,
                        const Tensor& dh, const Tensor& dc,
                        const Tensor& key_gate_inject) {
  const std::size_t batch = trace.x.dim(0);
  const std::size_t n = w.hidden;
  const std::size_t gn = gate_count(w.kind) * n;
  const bool inject = key_gate_inject.numel() > 0;

  StepGrads out;
  out.dx = Tensor({batch, w.input_dim});
  out.dh_prev = Tensor({batch, n});

  if (w.kind == CellKind::LSTM) {
    out.dc_prev = Tensor({batch, n});
    Tensor da({batch, gn});  // gradients w.r.t. preactivations
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < n; ++j) {
        const double i = trace.gates.at(b, j);
        const double f = trace.gates.at(b, n + j);
        const double g = trace.gates.at(b, 2 * n + j);
        const double o = trace.gates.at(b, 3 * n + j);
        const double tc = trace.tanh_c.at(b, j);
        const double dho = dh.at(b, j);
        const double d_o = dho * tc;
        double d_c = dho * o * (1.0 - tc * tc);
        if (dc.numel() > 0) d_c += dc.at(b, j);
        const double d_i = d_c * g;
        double d_f = d_c * trace.c_prev.at(b, j);
        if (inject) d_f += key_gate_inject.at(b, j);
        const double d_g = d_c * i;
        out.dc_prev.at(b, j) = d_c * f;
        da.at(b, j) = d_i * i * (1.0 - i);
        da.at(b, n + j) = d_f * f * (1.0 - f);
        da.at(b, 2 * n + j) = d_g * (1.0 - g * g);
        da.at(b, 3 * n + j) = d_o * o * (1.0 - o);
      }
    }
    kernels::matmul_tn(da.data(), trace.x.data(), w.W_ih.grad.data(), batch, gn,
                       w.input_dim);
    kernels::matmul_tn(da.data(), trace.h_prev.data(), w.W_hh.grad.data(),
                       batch, gn, n);
    add_colsum(w.b_ih.grad, da);
    add_colsum(w.b_hh.grad, da);
    kernels::matmul_nn(da.data(), w.W_ih.value.data(), out.dx.data(), batch, gn,
                       w.input_dim);
    kernels::matmul_nn(da.data(), w.W_hh.value.data(), out.dh_prev.data(),
                       batch, gn, n);
    return out;
  }

  // GRU
  Tensor d_xpart({batch, gn});
  Tensor d_hpart({batch, gn});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < n; ++j) {
      const double r = trace.gates.at(b, j);
      const double z = trace.gates.at(b, n + j);
      const double nn = trace.gates.at(b, 2 * n + j);
      const double hl = trace.hn_lin.at(b, j);
      const double dhj = dh.at(b, j);
      const double d_z = dhj * (trace.h_prev.at(b, j) - nn);
      const double d_n = dhj * (1.0 - z);
      out.dh_prev.at(b, j) += dhj * z;
      const double d_an = d_n * (1.0 - nn * nn);
      double d_r = d_an * hl;
      if (inject) d_r += key_gate_inject.at(b, j);
      const double d_hl = d_an * r;
      const double d_ar = d_r * r * (1.0 - r);
      const double d_az = d_z * z * (1.0 - z);
      d_xpart.at(b, j) = d_ar;
      d_xpart.at(b, n + j) = d_az;
      d_xpart.at(b, 2 * n + j) = d_an;
      d_hpart.at(b, j) = d_ar;
      d_hpart.at(b, n + j) = d_az;
      d_hpart.at(b, 2 * n + j) = d_hl;
    }
  }
  kernels::matmul_tn(d_xpart.data(), trace.x.data(), w.W_ih.grad.data(), batch,
                     gn, w.input_dim);
  kernels::matmul_tn(d_hpart.data(), trace.h_prev.data(), w.W_hh.grad.data(),
                     batch, gn, n);
  add_colsum(w.b_ih.grad, d_xpart);
  add_colsum(w.b_hh.grad, d_hpart);
  kernels::matmul_nn(d_xpart.data(), w.W_ih.value.data(), out.dx.data(), batch,
                     gn, w.input_dim);
  kernels::matmul_nn(d_hpart.data(), w.W_hh.value.data(), out.dh_prev.data(),
                     batch, gn, n);
  return out;
}

}  // namespace gkrnn
