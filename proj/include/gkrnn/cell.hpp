#pragma once

#include <cstddef>
#include <string>

#include "gkrnn/ops.hpp"
#include "gkrnn/rng.hpp"
#include "gkrnn/tensor.hpp"

namespace gkrnn {

enum class CellKind { LSTM, GRU };

inline std::size_t gate_count(CellKind k) { return k == CellKind::LSTM ? 4 : 3; }

// Index of the gate block whose weights double as the key gate:
// the forget gate for LSTM (i,f,g,o ordering), the reset gate for GRU
// (r,z,n ordering).
inline std::size_t key_gate_index(CellKind k) {
  return k == CellKind::LSTM ? 1 : 0;
}

// One recurrent cell's weights. Gate blocks are stacked along the first
// axis in the fixed order above; slicing the key gate's block of
// W_ih/b_ih gives the input-side key-gate weights and the same block of
// W_hh/b_hh the hidden-side ones, so protection adds no parameters.
struct CellWeights {
  CellKind kind;
  std::size_t input_dim;
  std::size_t hidden;
  Parameter W_ih;  // [G*N, d_in]
  Parameter W_hh;  // [G*N, N]
  Parameter b_ih;  // [G*N]
  Parameter b_hh;  // [G*N]

  CellWeights(CellKind k, std::size_t d_in, std::size_t n,
              const std::string& name_prefix);

  void init_uniform(Rng& rng);
};

struct CellState {
  Tensor h;  // [batch, N]
  Tensor c;  // [batch, N]; LSTM only, empty for GRU

  static CellState zeros(CellKind kind, std::size_t batch, std::size_t n);
};

// Everything the backward pass needs to retrace one forward step.
struct StepTrace {
  Tensor x;        // [B, d_in]
  Tensor h_prev;   // [B, N]
  Tensor c_prev;   // [B, N] (LSTM)
  Tensor gates;    // [B, G*N] post-activation values
  Tensor hn_lin;   // [B, N] (GRU): W_hn h_prev + b_hn, cached pre r-gating
  Tensor c_new;    // [B, N] (LSTM): cell state before any external gating
  Tensor tanh_c;   // [B, N] (LSTM)
};

struct StepResult {
  CellState state;
  StepTrace trace;
};

// Standard LSTM/GRU recurrence. Used for the input stream and, with key
// vectors as input, for the key's own hidden-state recurrence.
StepResult plain_step(const CellWeights& w, const Tensor& x_t, const CellState& s);

// sigma(W_ik k_t + b_ik + W_hk h_k_prev + b_hk) with the key-gate weight
// aliases; returns [batch_keys, N]. Matches the key-gate activation that
// plain_step produces for the same inputs.
Tensor gatekeeper_activation(const CellWeights& w, const Tensor& k_t,
                             const Tensor& h_k_prev);

// plain_step followed by elementwise scaling of h (and c for LSTM) by
// gk_t. gk_t is either [N] (broadcast over the batch) or [B, N].
StepResult gated_step(const CellWeights& w, const Tensor& x_t,
                      const CellState& s, const Tensor& gk_t);

// Gradients flowing out of one step.
struct StepGrads {
  Tensor dx;       // [B, d_in]
  Tensor dh_prev;  // [B, N]
  Tensor dc_prev;  // [B, N] (LSTM)
};

// Backward through one plain step. dh/dc are gradients w.r.t. the step's
// outputs; key_gate_inject, when non-empty ([B, N]), is an extra gradient
// w.r.t. the key gate's post-sigmoid activation (the gk_t path). Weight
// gradients accumulate into w's Parameter grads.
StepGrads step_backward(CellWeights& w, const StepTrace& trace,
                        const Tensor& dh, const Tensor& dc,
                        const Tensor& key_gate_inject);

}  // namespace gkrnn
