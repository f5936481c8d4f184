#include "gkrnn/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace gkrnn {

std::string AttackReport::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["parameters"] = parameters;
  j["pre"] = {{"test_acc", pre_test_acc},
              {"trigger_acc", pre_trigger_acc},
              {"sign_acc", pre_sign_acc}};
  j["post"] = {{"test_acc", post_test_acc},
               {"trigger_acc", post_trigger_acc},
               {"sign_acc", post_sign_acc}};
  j["elapsed_steps"] = elapsed_steps;
  return j.dump(2);
}

void prune_global_l1(SequenceModel& model, double rate) {
  if (rate < 0.0 || rate > 1.0)
    throw std::invalid_argument("prune_global_l1: rate must be in [0,1]");
  struct Entry {
    double mag;
    const std::string* name;
    std::size_t flat;
    double* value;
  };
  std::vector<Entry> pool;
  for (auto* p : model.parameters()) {
    if (p->name.find(".b_") != std::string::npos || p->name == "head.b")
      continue;  // biases are never pruned
    for (std::size_t i = 0; i < p->value.numel(); ++i)
      pool.push_back({std::abs(p->value[i]), &p->name, i, &p->value[i]});
  }
  const auto zero_count =
      static_cast<std::size_t>(std::llround(rate * static_cast<double>(pool.size())));
  if (zero_count == 0) return;
  std::nth_element(pool.begin(), pool.begin() + (zero_count - 1), pool.end(),
                   [](const Entry& a, const Entry& b) {
                     return std::tie(a.mag, *a.name, a.flat) <
                            std::tie(b.mag, *b.name, b.flat);
                   });
  for (std::size_t i = 0; i < zero_count; ++i) *pool[i].value = 0.0;
}

std::size_t finetune_attack(SequenceModel& model, const Dataset& ds,
                            const std::vector<std::size_t>& train_idx,
                            std::size_t steps, std::size_t batch_size,
                            double lr, std::uint64_t seed) {
  const bool was_enabled = model.config().gatekeeper_enabled;
  model.set_gatekeeper_enabled(false);
  Rng rng(seed);
  Optimizer opt(model, lr);
  std::vector<std::size_t> order = train_idx;
  std::size_t done = 0;
  while (done < steps) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size() && done < steps;
         start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      Batch batch = make_batch(ds, std::vector<std::size_t>(
                                       order.begin() + start, order.begin() + end));
      model.zero_grad();
      auto fwd = model.forward_sequence(batch, nullptr);
      auto l = softmax_cross_entropy(fwd.logits, batch.labels);
      model.backward_sequence(fwd, batch, l.grad_logits);
      opt.step(model);
      ++done;
    }
    if (order.empty()) break;
  }
  model.set_gatekeeper_enabled(was_enabled);
  return done;
}

std::size_t overwrite_attack(SequenceModel& model, const Key& new_key,
                             const Signature& new_sig, const Dataset& ds,
                             const std::vector<std::size_t>& train_idx,
                             const TriggerSet* new_trigger, std::size_t steps,
                             std::size_t batch_size, std::size_t trigger_batch,
                             double lr, std::uint64_t seed) {
  model.set_gatekeeper_enabled(true);
  Rng rng(seed);
  Optimizer opt(model, lr);
  std::vector<std::size_t> order = train_idx;
  std::size_t done = 0;
  while (done < steps) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size() && done < steps;
         start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      StepInputs inputs;
      inputs.dataset = &ds;
      for (std::size_t i = start; i < end; ++i)
        inputs.clean.push_back(&ds.samples[order[i]]);
      if (new_trigger && new_trigger->size() > 0)
        for (std::size_t i = 0; i < std::min(trigger_batch, new_trigger->size());
             ++i)
          inputs.trigger.push_back(
              &new_trigger->inputs[rng.next_below(new_trigger->size())]);
      train_public_step(model, new_key, new_sig, inputs, opt);
      ++done;
    }
    if (order.empty()) break;
  }
  return done;
}

FlipResult flip_signs(SequenceModel& model, const Key& key,
                      const Signature& sig, double fraction, const Dataset& ds,
                      const std::vector<std::size_t>& train_idx,
                      const TriggerSet* trigger, std::size_t step_cap,
                      std::size_t batch_size, std::size_t trigger_batch,
                      double lr, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("flip_signs: fraction must be in [0,1]");
  Rng rng(seed);

  FlipResult res;
  res.flipped = sig;
  const auto n_flip = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(sig.signs.size())));
  std::vector<std::size_t> positions(sig.signs.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  rng.shuffle(positions);
  for (std::size_t i = 0; i < n_flip; ++i)
    res.flipped.signs[positions[i]] = -res.flipped.signs[positions[i]];
  if (n_flip == 0) return res;

  Optimizer opt(model, lr);
  model.set_gatekeeper_enabled(true);
  std::vector<std::size_t> order = train_idx;
  while (res.steps_run < step_cap) {
    rng.shuffle(order);
    bool converged = false;
    for (std::size_t start = 0; start < order.size() && res.steps_run < step_cap;
         start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      StepInputs inputs;
      inputs.dataset = &ds;
      for (std::size_t i = start; i < end; ++i)
        inputs.clean.push_back(&ds.samples[order[i]]);
      if (trigger && trigger->size() > 0)
        for (std::size_t i = 0; i < std::min(trigger_batch, trigger->size()); ++i)
          inputs.trigger.push_back(
              &trigger->inputs[rng.next_below(trigger->size())]);
      LossBreakdown lb = train_public_step(model, key, res.flipped, inputs, opt);
      ++res.steps_run;
      res.final_sign_loss = lb.l_r;
      if (lb.l_r <= 0.0) {
        converged = true;
        break;
      }
    }
    if (converged || order.empty()) break;
  }
  return res;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "parameter,test_acc,trigger_acc,sign_acc\n";
  for (const auto& r : rows)
    out << r.parameter << ',' << r.test_acc << ',' << r.trigger_acc << ','
        << r.sign_acc << '\n';
  return out.str();
}

}  // namespace gkrnn
