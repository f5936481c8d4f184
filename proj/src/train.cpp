#include "gkrnn/train.hpp"

#include <algorithm>
#include <stdexcept>

namespace gkrnn {

std::string scheme_name(Scheme s) {
  return s == Scheme::Public ? "public" : "private";
}

Scheme scheme_from_name(const std::string& s) {
  if (s == "public") return Scheme::Public;
  if (s == "private") return Scheme::Private;
  throw std::invalid_argument("unknown scheme: " + s);
}

Dataset TriggerSet::as_dataset(const Dataset& source) const {
  Dataset ds;
  ds.tokenized = source.tokenized;
  ds.classes = source.classes;
  ds.vocab = source.vocab;
  ds.feat_dim = source.feat_dim;
  ds.samples = inputs;
  return ds;
}

TriggerSet build_trigger_set(Dataset& ds, std::size_t t, Rng& rng) {
  if (t > ds.samples.size())
    throw std::invalid_argument("build_trigger_set: t exceeds dataset size");
  if (ds.classes < 2)
    throw std::invalid_argument("build_trigger_set: need at least 2 classes");
  TriggerSet ts;
  for (std::size_t i = 0; i < t; ++i) {
    const std::size_t pick =
        static_cast<std::size_t>(rng.next_below(ds.samples.size()));
    Sample s = std::move(ds.samples[pick]);
    ds.samples[pick] = std::move(ds.samples.back());
    ds.samples.pop_back();
    const int original = s.label;
    // uniform over the C-1 wrong classes
    int assigned = static_cast<int>(rng.next_below(ds.classes - 1));
    if (assigned >= original) ++assigned;
    s.label = assigned;
    ts.original_labels.push_back(original);
    ts.assigned_labels.push_back(assigned);
    ts.inputs.push_back(std::move(s));
  }
  return ts;
}

Optimizer::Optimizer(SequenceModel& model, double lr) : lr_(lr) {
  for (auto* p : model.parameters()) states_.emplace_back(p->value.shape(), lr);
}

void Optimizer::step(SequenceModel& model) {
  auto ps = model.parameters();
  if (ps.size() != states_.size())
    throw std::invalid_argument("Optimizer: parameter list changed");
  for (std::size_t i = 0; i < ps.size(); ++i) adam_step(*ps[i], states_[i]);
}

void Optimizer::set_lr(double lr) {
  lr_ = lr;
  for (auto& s : states_) s.lr = lr;
}

namespace {

Batch combined_batch(const StepInputs& inputs) {
  std::vector<const Sample*> all = inputs.clean;
  all.insert(all.end(), inputs.trigger.begin(), inputs.trigger.end());
  return make_batch(*inputs.dataset, all);
}

LossBreakdown protected_step(SequenceModel& model, const Key& key,
                             const Signature& sig, const StepInputs& inputs,
                             Optimizer& opt, double sign_loss_weight,
                             bool with_lx) {
  if (inputs.dataset == nullptr || inputs.clean.empty())
    throw std::invalid_argument("training step: missing batch");
  Batch batch = combined_batch(inputs);

  LossBreakdown out;
  model.zero_grad();

  model.set_gatekeeper_enabled(true);
  auto fk = model.forward_sequence(batch, &key);
  auto lk = softmax_cross_entropy(fk.logits, batch.labels);
  model.backward_sequence(fk, batch, lk.grad_logits);
  out.l_k = lk.loss;

  if (with_lx) {
    model.set_gatekeeper_enabled(false);
    auto fx = model.forward_sequence(batch, nullptr);
    auto lx = softmax_cross_entropy(fx.logits, batch.labels);
    model.backward_sequence(fx, batch, lx.grad_logits);
    model.set_gatekeeper_enabled(true);
    out.l_x = lx.loss;
  }

  auto kfs = model.key_first_state(key);
  auto lr = sign_loss(kfs.h0_mean, sig);
  if (sign_loss_weight != 0.0) {
    Tensor g = lr.grad_h0;
    for (auto& v : g.vec()) v *= sign_loss_weight;
    model.key_first_state_backward(kfs, g);
  }
  out.l_r = sign_loss_weight * lr.loss;

  opt.step(model);
  out.total = out.l_k + out.l_x + out.l_r;
  return out;
}

}  // namespace

LossBreakdown train_public_step(SequenceModel& model, const Key& key,
                                const Signature& sig, const StepInputs& inputs,
                                Optimizer& opt, double sign_loss_weight) {
  return protected_step(model, key, sig, inputs, opt, sign_loss_weight, true);
}

LossBreakdown train_private_step(SequenceModel& model, const Key& key,
                                 const Signature& sig, const StepInputs& inputs,
                                 Optimizer& opt, double sign_loss_weight) {
  return protected_step(model, key, sig, inputs, opt, sign_loss_weight, false);
}

double evaluate(const SequenceModel& model, const Dataset& ds,
                const std::vector<std::size_t>& indices, const Key* key,
                std::size_t eval_batch) {
  std::vector<std::size_t> idx = indices;
  if (idx.empty())
    for (std::size_t i = 0; i < ds.samples.size(); ++i) idx.push_back(i);
  if (idx.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < idx.size(); start += eval_batch) {
    const std::size_t end = std::min(idx.size(), start + eval_batch);
    Batch b = make_batch(
        ds, std::vector<std::size_t>(idx.begin() + start, idx.begin() + end));
    auto fwd = model.forward_sequence(b, key);
    for (std::size_t i = 0; i < b.batch; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < ds.classes; ++c)
        if (fwd.logits.at(i, c) > fwd.logits.at(i, best)) best = c;
      if (static_cast<int>(best) == b.labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

TrainResult train_model(SequenceModel& model, const Dataset& train,
                        const std::vector<std::size_t>& train_idx,
                        const std::vector<std::size_t>& val_idx,
                        const TriggerSet* trigger, const Key* key,
                        const Signature* sig, const TrainConfig& cfg) {
  const bool is_protected = key != nullptr;
  if (is_protected && sig == nullptr)
    throw std::invalid_argument("train_model: protected training needs a signature");

  Rng rng(cfg.seed);
  Optimizer opt(model, cfg.lr);
  TrainResult result;
  double best_val = -1.0;
  std::size_t stale_epochs = 0;

  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochStats stats;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      StepInputs inputs;
      inputs.dataset = &train;
      for (std::size_t i = start; i < end; ++i)
        inputs.clean.push_back(&train.samples[order[i]]);

      if (is_protected) {
        if (trigger && trigger->size() > 0) {
          const std::size_t n = std::min(cfg.trigger_batch, trigger->size());
          for (std::size_t i = 0; i < n; ++i)
            inputs.trigger.push_back(
                &trigger->inputs[rng.next_below(trigger->size())]);
        }
        LossBreakdown lb =
            cfg.scheme == Scheme::Public
                ? train_public_step(model, *key, *sig, inputs, opt,
                                    cfg.sign_loss_weight)
                : train_private_step(model, *key, *sig, inputs, opt,
                                     cfg.sign_loss_weight);
        stats.mean_l_k += lb.l_k;
        stats.mean_l_x += lb.l_x;
        stats.mean_l_r += lb.l_r;
      } else {
        Batch batch = make_batch(train, inputs.clean);
        model.zero_grad();
        auto fwd = model.forward_sequence(batch, nullptr);
        auto l = softmax_cross_entropy(fwd.logits, batch.labels);
        model.backward_sequence(fwd, batch, l.grad_logits);
        opt.step(model);
        stats.mean_l_x += l.loss;
      }
      ++steps;
    }
    if (steps > 0) {
      stats.mean_l_k /= static_cast<double>(steps);
      stats.mean_l_x /= static_cast<double>(steps);
      stats.mean_l_r /= static_cast<double>(steps);
    }
    result.steps_run += steps;
    stats.val_accuracy =
        val_idx.empty() ? 0.0 : evaluate(model, train, val_idx, key);
    result.epochs.push_back(stats);

    if (!val_idx.empty()) {
      if (stats.val_accuracy > best_val + 1e-12) {
        best_val = stats.val_accuracy;
        stale_epochs = 0;
      } else if (++stale_epochs >= cfg.patience) {
        break;
      }
    }
  }
  return result;
}

}  // namespace gkrnn
