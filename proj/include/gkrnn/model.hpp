#pragma once

#include <optional>
#include <vector>

#include "gkrnn/cell.hpp"
#include "gkrnn/keysig.hpp"

namespace gkrnn {

struct ModelConfig {
  CellKind cell = CellKind::LSTM;
  bool bidirectional = false;
  std::size_t hidden = 32;
  std::size_t classes = 2;
  std::size_t input_dim = 8;  // feature width; embedding dim for token input
  std::size_t vocab = 0;      // > 0 adds an embedding table and token input
  bool gatekeeper_enabled = true;
};

// One minibatch, either real-valued rows or (left-padded) token ids.
struct Batch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  Tensor features;          // [B, T, d] when real-valued, empty otherwise
  std::vector<int> tokens;  // B*T row-major when tokenized, empty otherwise
  std::vector<int> labels;

  bool tokenized() const { return !tokens.empty(); }
};

struct DirectionTrace {
  std::vector<StepTrace> input_steps;
  std::vector<StepTrace> key_steps;  // empty when running unprotected
  std::vector<Tensor> gk;            // per t, [N]: key-mean gate activation
  std::vector<Tensor> h_plain;       // per t, [B, N] pre-gating hidden
  std::vector<Tensor> c_plain;       // per t, [B, N] pre-gating cell (LSTM)
  Tensor h_final;                    // [B, N]
};

struct ForwardResult {
  Tensor logits;  // [B, C]
  bool gated = false;
  std::vector<DirectionTrace> dirs;  // [fwd] or [fwd, bwd]
  Tensor head_input;                 // [B, N or 2N]
};

class SequenceModel {
 public:
  explicit SequenceModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  void set_gatekeeper_enabled(bool on) { cfg_.gatekeeper_enabled = on; }

  void init(Rng& rng);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

  // Flat parameter vector, in parameters() order (finite-difference probe).
  Tensor flatten_values() const;
  void unflatten_values(const Tensor& flat);
  Tensor flatten_grads() const;

  // Runs the model over the batch. A null key (or a disabled gatekeeper)
  // gives the unprotected rollout; otherwise the key stream advances via
  // plain_step alongside the input stream and gates it each timestep.
  ForwardResult forward_sequence(const Batch& batch, const Key* key) const;

  // Exact gradients of the loss whose logits-gradient is grad_logits,
  // accumulated into every Parameter's grad, through both the gated input
  // stream and the key recurrence.
  void backward_sequence(const ForwardResult& fwd, const Batch& batch,
                         const Tensor& grad_logits);

  // Key stream's first hidden state (mean over the K keys) on the forward
  // direction cell, with the trace needed to backpropagate the sign loss.
  struct KeyFirstState {
    Tensor h0_mean;  // [N]
    StepTrace trace;
  };
  KeyFirstState key_first_state(const Key& key) const;
  void key_first_state_backward(const KeyFirstState& kfs, const Tensor& dh0_mean);

  Parameter* embedding() { return embedding_ ? &*embedding_ : nullptr; }
  const Parameter* embedding() const { return embedding_ ? &*embedding_ : nullptr; }
  CellWeights& cell_fwd() { return fwd_; }
  const CellWeights& cell_fwd() const { return fwd_; }
  CellWeights* cell_bwd() { return bwd_ ? &*bwd_ : nullptr; }
  const CellWeights* cell_bwd() const { return bwd_ ? &*bwd_ : nullptr; }
  Parameter& head_weight() { return head_W_; }
  Parameter& head_bias() { return head_b_; }

 private:
  Tensor input_at(const Batch& batch, std::size_t t, bool reversed) const;
  DirectionTrace run_direction(const CellWeights& w, const Batch& batch,
                               const Key* key, bool reversed) const;

  ModelConfig cfg_;
  std::optional<Parameter> embedding_;
  CellWeights fwd_;
  std::optional<CellWeights> bwd_;
  Parameter head_W_;
  Parameter head_b_;
};

}  // namespace gkrnn
