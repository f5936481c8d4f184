#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gkrnn/dataset.hpp"
#include "gkrnn/keysig.hpp"
#include "gkrnn/model.hpp"

namespace gkrnn {

enum class Scheme { Private, Public };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& s);

// Samples re-labeled away from their true class, held out of training.
struct TriggerSet {
  std::vector<Sample> inputs;       // label field carries the assigned label
  std::vector<int> assigned_labels;
  std::vector<int> original_labels;

  std::size_t size() const { return inputs.size(); }
  Dataset as_dataset(const Dataset& source) const;
};

// Draws t samples without replacement from ds.samples (removing them from
// the pool) and assigns each a uniformly random wrong label.
TriggerSet build_trigger_set(Dataset& ds, std::size_t t, Rng& rng);

struct LossBreakdown {
  double l_k = 0.0;
  double l_x = 0.0;
  double l_r = 0.0;
  double total = 0.0;
};

// Adam over all model parameters.
class Optimizer {
 public:
  Optimizer(SequenceModel& model, double lr);
  void step(SequenceModel& model);
  void set_lr(double lr);
  double lr() const { return lr_; }

 private:
  std::vector<AdamState> states_;
  double lr_;
};

struct StepInputs {
  const Dataset* dataset = nullptr;
  std::vector<const Sample*> clean;
  std::vector<const Sample*> trigger;
};

// One optimizer step of the Public scheme: L_k on the gated model with the
// key, L_x on the ungated model, L_r on the key stream's first hidden
// state, all on the concatenated clean+trigger batch.
LossBreakdown train_public_step(SequenceModel& model, const Key& key,
                                const Signature& sig, const StepInputs& inputs,
                                Optimizer& opt, double sign_loss_weight = 1.0);

// Private scheme: same but without the L_x branch.
LossBreakdown train_private_step(SequenceModel& model, const Key& key,
                                 const Signature& sig, const StepInputs& inputs,
                                 Optimizer& opt, double sign_loss_weight = 1.0);

// Argmax accuracy over the dataset restricted to `indices` (all samples if
// empty). A null key evaluates the unprotected path.
double evaluate(const SequenceModel& model, const Dataset& ds,
                const std::vector<std::size_t>& indices, const Key* key,
                std::size_t eval_batch = 64);

struct TrainConfig {
  Scheme scheme = Scheme::Public;
  std::size_t epochs = 5;
  std::size_t batch_size = 32;    // m in the training step
  std::size_t trigger_batch = 4;  // n
  double lr = 1e-3;
  double sign_loss_weight = 1.0;
  std::size_t patience = 5;  // early stop on validation accuracy
  std::uint64_t seed = 1;
};

struct EpochStats {
  double mean_l_k = 0.0, mean_l_x = 0.0, mean_l_r = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::size_t steps_run = 0;
};

// Full protected training loop (Algorithm-1 style batching, early stopping
// on validation accuracy). Pass key == nullptr for an unprotected baseline.
TrainResult train_model(SequenceModel& model, const Dataset& train,
                        const std::vector<std::size_t>& train_idx,
                        const std::vector<std::size_t>& val_idx,
                        const TriggerSet* trigger, const Key* key,
                        const Signature* sig, const TrainConfig& cfg);

}  // namespace gkrnn
