#include "gkrnn/model.hpp"

#include <cmath>
#include <stdexcept>

#include "gkrnn/kernels.hpp"

namespace gkrnn {

SequenceModel::SequenceModel(const ModelConfig& cfg)
    : cfg_(cfg),
      fwd_(cfg.cell, cfg.input_dim, cfg.hidden, "rnn.fwd"),
      head_W_("head.W", Tensor({cfg.classes,
                                cfg.bidirectional ? 2 * cfg.hidden : cfg.hidden})),
      head_b_("head.b", Tensor({cfg.classes})) {
  if (cfg.vocab > 0)
    embedding_.emplace("embedding", Tensor({cfg.vocab, cfg.input_dim}));
  if (cfg.bidirectional)
    bwd_.emplace(cfg.cell, cfg.input_dim, cfg.hidden, "rnn.bwd");
}

void SequenceModel::init(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));
  if (embedding_)
    for (auto& v : embedding_->value.vec()) v = rng.uniform(-bound, bound);
  fwd_.init_uniform(rng);
  if (bwd_) bwd_->init_uniform(rng);
  for (auto& v : head_W_.value.vec()) v = rng.uniform(-bound, bound);
  head_b_.value.fill(0.0);
}

std::vector<Parameter*> SequenceModel::parameters() {
  std::vector<Parameter*> ps;
  if (embedding_) ps.push_back(&*embedding_);
  for (CellWeights* c : {&fwd_, bwd_ ? &*bwd_ : nullptr}) {
    if (!c) continue;
    ps.push_back(&c->W_ih);
    ps.push_back(&c->W_hh);
    ps.push_back(&c->b_ih);
    ps.push_back(&c->b_hh);
  }
  ps.push_back(&head_W_);
  ps.push_back(&head_b_);
  return ps;
}

std::vector<const Parameter*> SequenceModel::parameters() const {
  auto ps = const_cast<SequenceModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t SequenceModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.numel();
  return n;
}

void SequenceModel::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

Tensor SequenceModel::flatten_values() const {
  Tensor flat({parameter_count()});
  std::size_t i = 0;
  for (const auto* p : parameters())
    for (double v : p->value.vec()) flat[i++] = v;
  return flat;
}

void SequenceModel::unflatten_values(const Tensor& flat) {
  if (flat.numel() != parameter_count())
    throw std::invalid_argument("unflatten_values: size mismatch");
  std::size_t i = 0;
  for (auto* p : parameters())
    for (double& v : p->value.vec()) v = flat[i++];
}

Tensor SequenceModel::flatten_grads() const {
  Tensor flat({parameter_count()});
  std::size_t i = 0;
  for (const auto* p : parameters())
    for (double v : p->grad.vec()) flat[i++] = v;
  return flat;
}

Tensor SequenceModel::input_at(const Batch& batch, std::size_t t,
                               bool reversed) const {
  const std::size_t pos = reversed ? batch.steps - 1 - t : t;
  const std::size_t d = cfg_.input_dim;
  Tensor x({batch.batch, d});
  if (batch.tokenized()) {
    if (!embedding_)
      throw std::invalid_argument("token input but model has no embedding");
    for (std::size_t b = 0; b < batch.batch; ++b) {
      const int tok = batch.tokens[b * batch.steps + pos];
      if (tok < 0 || static_cast<std::size_t>(tok) >= cfg_.vocab)
        throw std::out_of_range("token id out of vocabulary range");
      const double* src =
          embedding_->value.data() + static_cast<std::size_t>(tok) * d;
      for (std::size_t i = 0; i < d; ++i) x.at(b, i) = src[i];
    }
  } else {
    if (batch.features.dim(2) != d)
      throw std::invalid_argument("feature width does not match model input_dim");
    for (std::size_t b = 0; b < batch.batch; ++b) {
      const double* src =
          batch.features.data() + (b * batch.steps + pos) * d;
      for (std::size_t i = 0; i < d; ++i) x.at(b, i) = src[i];
    }
  }
  return x;
}

namespace {

// Key timestep feeding gate t: the key is cycled when the input runs
// longer; the reverse direction reads the key back to front.
std::size_t key_pos(const Key& key, std::size_t t, bool reversed) {
  const std::size_t l = key.length();
  const std::size_t cyc = t % l;
  return reversed ? l - 1 - cyc : cyc;
}

Tensor mean_gate_rows(const Tensor& gates, std::size_t gate_idx, std::size_t n) {
  const std::size_t k = gates.dim(0);
  Tensor gk({n});
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < k; ++r) acc += gates.at(r, gate_idx * n + j);
    gk[j] = acc / static_cast<double>(k);
  }
  return gk;
}

}  // namespace

DirectionTrace SequenceModel::run_direction(const CellWeights& w,
                                            const Batch& batch, const Key* key,
                                            bool reversed) const {
  const std::size_t n = cfg_.hidden;
  const bool gated = key != nullptr && cfg_.gatekeeper_enabled;
  if (gated && key->feat_dim() != cfg_.input_dim)
    throw std::invalid_argument(
        "key feature width " + std::to_string(key->feat_dim()) +
        " does not match model input width " + std::to_string(cfg_.input_dim));

  DirectionTrace dir;
  CellState state = CellState::zeros(w.kind, batch.batch, n);
  CellState kstate =
      gated ? CellState::zeros(w.kind, key->count(), n) : CellState{};
  const std::size_t gidx = key_gate_index(w.kind);

  for (std::size_t t = 0; t < batch.steps; ++t) {
    Tensor gk;
    if (gated) {
      StepResult kres =
          plain_step(w, key->step_all(key_pos(*key, t, reversed)), kstate);
      gk = mean_gate_rows(kres.trace.gates, gidx, n);
      kstate = std::move(kres.state);
      dir.key_steps.push_back(std::move(kres.trace));
    }
    StepResult res = plain_step(w, input_at(batch, t, reversed), state);
    if (gated) {
      dir.h_plain.push_back(res.state.h);
      if (w.kind == CellKind::LSTM) dir.c_plain.push_back(res.state.c);
      for (std::size_t b = 0; b < batch.batch; ++b)
        for (std::size_t j = 0; j < n; ++j) {
          res.state.h.at(b, j) *= gk[j];
          if (w.kind == CellKind::LSTM) res.state.c.at(b, j) *= gk[j];
        }
      dir.gk.push_back(std::move(gk));
    }
    state = std::move(res.state);
    dir.input_steps.push_back(std::move(res.trace));
  }
  dir.h_final = state.h;
  return dir;
}

ForwardResult SequenceModel::forward_sequence(const Batch& batch,
                                              const Key* key) const {
  if (batch.batch == 0 || batch.steps == 0)
    throw std::invalid_argument("forward_sequence: empty batch");
  ForwardResult out;
  out.gated = key != nullptr && cfg_.gatekeeper_enabled;
  out.dirs.push_back(run_direction(fwd_, batch, key, false));
  if (bwd_) out.dirs.push_back(run_direction(*bwd_, batch, key, true));

  const std::size_t n = cfg_.hidden;
  const std::size_t width = bwd_ ? 2 * n : n;
  Tensor head_in({batch.batch, width});
  for (std::size_t b = 0; b < batch.batch; ++b) {
    for (std::size_t j = 0; j < n; ++j)
      head_in.at(b, j) = out.dirs[0].h_final.at(b, j);
    if (bwd_)
      for (std::size_t j = 0; j < n; ++j)
        head_in.at(b, n + j) = out.dirs[1].h_final.at(b, j);
  }

  Tensor logits({batch.batch, cfg_.classes});
  for (std::size_t b = 0; b < batch.batch; ++b)
    for (std::size_t c = 0; c < cfg_.classes; ++c)
      logits.at(b, c) = head_b_.value[c];
  kernels::matmul_nt(head_in.data(), head_W_.value.data(), logits.data(),
                     batch.batch, width, cfg_.classes);
  out.head_input = std::move(head_in);
  out.logits = std::move(logits);
  return out;
}

void SequenceModel::backward_sequence(const ForwardResult& fwd,
                                      const Batch& batch,
                                      const Tensor& grad_logits) {
  if (fwd.dirs.empty() || fwd.dirs[0].input_steps.size() != batch.steps)
    throw std::invalid_argument("backward_sequence: trace/batch mismatch");
  require_shape(grad_logits, {batch.batch, cfg_.classes},
                "backward_sequence: grad_logits");

  const std::size_t n = cfg_.hidden;
  const std::size_t width = bwd_ ? 2 * n : n;

  // Head.
  kernels::matmul_tn(grad_logits.data(), fwd.head_input.data(),
                     head_W_.grad.data(), batch.batch, cfg_.classes, width);
  for (std::size_t b = 0; b < batch.batch; ++b)
    for (std::size_t c = 0; c < cfg_.classes; ++c)
      head_b_.grad[c] += grad_logits.at(b, c);
  Tensor d_head_in({batch.batch, width});
  kernels::matmul_nn(grad_logits.data(), head_W_.value.data(), d_head_in.data(),
                     batch.batch, cfg_.classes, width);

  for (std::size_t dix = 0; dix < fwd.dirs.size(); ++dix) {
    const DirectionTrace& dir = fwd.dirs[dix];
    const bool reversed = dix == 1;
    CellWeights& w = reversed ? *bwd_ : fwd_;
    const bool lstm = w.kind == CellKind::LSTM;

    Tensor dh({batch.batch, n});
    for (std::size_t b = 0; b < batch.batch; ++b)
      for (std::size_t j = 0; j < n; ++j)
        dh.at(b, j) = d_head_in.at(b, (reversed ? n : 0) + j);
    Tensor dc = lstm ? Tensor({batch.batch, n}) : Tensor{};

    std::vector<Tensor> dgk(fwd.gated ? batch.steps : 0);

    for (std::size_t t = batch.steps; t-- > 0;) {
      if (fwd.gated) {
        Tensor& gk = dgk[t];
        gk = Tensor({n});
        const Tensor& gkv = dir.gk[t];
        for (std::size_t b = 0; b < batch.batch; ++b)
          for (std::size_t j = 0; j < n; ++j) {
            gk[j] += dh.at(b, j) * dir.h_plain[t].at(b, j);
            if (lstm) gk[j] += dc.at(b, j) * dir.c_plain[t].at(b, j);
            dh.at(b, j) *= gkv[j];
            if (lstm) dc.at(b, j) *= gkv[j];
          }
      }
      StepGrads g = step_backward(w, dir.input_steps[t], dh, dc, Tensor{});
      dh = std::move(g.dh_prev);
      if (lstm) dc = std::move(g.dc_prev);

      if (batch.tokenized() && embedding_) {
        const std::size_t pos = reversed ? batch.steps - 1 - t : t;
        for (std::size_t b = 0; b < batch.batch; ++b) {
          const auto tok =
              static_cast<std::size_t>(batch.tokens[b * batch.steps + pos]);
          double* dst = embedding_->grad.data() + tok * cfg_.input_dim;
          for (std::size_t i = 0; i < cfg_.input_dim; ++i)
            dst[i] += g.dx.at(b, i);
        }
      }
    }

    if (fwd.gated) {
      const std::size_t kcount = dir.key_steps[0].x.dim(0);
      Tensor dkh({kcount, n});
      Tensor dkc = lstm ? Tensor({kcount, n}) : Tensor{};
      for (std::size_t t = batch.steps; t-- > 0;) {
        Tensor inject({kcount, n});
        for (std::size_t r = 0; r < kcount; ++r)
          for (std::size_t j = 0; j < n; ++j)
            inject.at(r, j) = dgk[t][j] / static_cast<double>(kcount);
        StepGrads g = step_backward(w, dir.key_steps[t], dkh, dkc, inject);
        dkh = std::move(g.dh_prev);
        if (lstm) dkc = std::move(g.dc_prev);
        // Keys are fixed inputs; g.dx is dropped.
      }
    }
  }
}

SequenceModel::KeyFirstState SequenceModel::key_first_state(
    const Key& key) const {
  if (key.feat_dim() != cfg_.input_dim)
    throw std::invalid_argument("key_first_state: key width mismatch");
  CellState zero = CellState::zeros(fwd_.kind, key.count(), cfg_.hidden);
  StepResult res = plain_step(fwd_, key.step_all(0), zero);
  KeyFirstState kfs;
  kfs.h0_mean = Tensor({cfg_.hidden});
  for (std::size_t j = 0; j < cfg_.hidden; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < key.count(); ++r) acc += res.state.h.at(r, j);
    kfs.h0_mean[j] = acc / static_cast<double>(key.count());
  }
  kfs.trace = std::move(res.trace);
  return kfs;
}

void SequenceModel::key_first_state_backward(const KeyFirstState& kfs,
                                             const Tensor& dh0_mean) {
  const std::size_t kcount = kfs.trace.x.dim(0);
  Tensor dh({kcount, cfg_.hidden});
  for (std::size_t r = 0; r < kcount; ++r)
    for (std::size_t j = 0; j < cfg_.hidden; ++j)
      dh.at(r, j) = dh0_mean[j] / static_cast<double>(kcount);
  Tensor dc = fwd_.kind == CellKind::LSTM ? Tensor({kcount, cfg_.hidden})
                                          : Tensor{};
  step_backward(fwd_, kfs.trace, dh, dc, Tensor{});
}

}  // namespace gkrnn
