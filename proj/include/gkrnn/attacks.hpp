#pragma once

#include <string>
#include <vector>

#include "gkrnn/train.hpp"

namespace gkrnn {

struct AttackReport {
  std::string kind;
  std::string parameters;  // echoed verbatim, e.g. "rate=0.4" or "steps=120"
  double pre_test_acc = 0.0, post_test_acc = 0.0;
  double pre_trigger_acc = 0.0, post_trigger_acc = 0.0;
  double pre_sign_acc = 0.0, post_sign_acc = 0.0;
  std::size_t elapsed_steps = 0;

  std::string to_json() const;
};

// Zeroes the `rate` fraction of smallest-magnitude entries across all
// weight tensors pooled together (biases excluded). Ties break by
// parameter name, then flat index.
void prune_global_l1(SequenceModel& model, double rate);

// Task-only training with the gatekeeper disabled: no key, no trigger set,
// no sign loss. Returns the number of optimizer steps run.
std::size_t finetune_attack(SequenceModel& model, const Dataset& ds,
                            const std::vector<std::size_t>& train_idx,
                            std::size_t steps, std::size_t batch_size,
                            double lr, std::uint64_t seed);

// Re-runs the protected (Public) training procedure from the stolen
// weights with the attacker's fresh key/signature/trigger set.
std::size_t overwrite_attack(SequenceModel& model, const Key& new_key,
                             const Signature& new_sig, const Dataset& ds,
                             const std::vector<std::size_t>& train_idx,
                             const TriggerSet* new_trigger, std::size_t steps,
                             std::size_t batch_size, std::size_t trigger_batch,
                             double lr, std::uint64_t seed);

// Flips `fraction` of the signature's signs (positions chosen by rng) and
// retrains under the full protected objective until the sign loss hits
// zero or `step_cap` steps have run. Returns the corrupted signature.
struct FlipResult {
  Signature flipped;
  std::size_t steps_run = 0;
  double final_sign_loss = 0.0;
};
FlipResult flip_signs(SequenceModel& model, const Key& key,
                      const Signature& sig, double fraction, const Dataset& ds,
                      const std::vector<std::size_t>& train_idx,
                      const TriggerSet* trigger, std::size_t step_cap,
                      std::size_t batch_size, std::size_t trigger_batch,
                      double lr, std::uint64_t seed);

// One row of a pruning/flip sweep CSV (parameter, test_acc, trigger_acc,
// sign_acc).
struct SweepRow {
  double parameter = 0.0;
  double test_acc = 0.0;
  double trigger_acc = 0.0;
  double sign_acc = 0.0;
};
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace gkrnn
