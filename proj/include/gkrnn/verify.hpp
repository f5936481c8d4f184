#pragma once

#include <string>
#include <vector>

#include "gkrnn/train.hpp"

namespace gkrnn {

struct WhiteboxResult {
  double bit_accuracy = 0.0;
  std::string decoded_text;
};

// Decodes the signature off the key stream's first hidden state.
WhiteboxResult verify_whitebox(const SequenceModel& model, const Key& key,
                               const Signature& reference);

struct BlackboxResult {
  std::size_t matches = 0;
  std::size_t total = 0;
  double p_value = 1.0;
};

// Exact one-sided binomial tail P(X >= matches), X ~ Binomial(n, 1/C),
// over trigger-set queries answered with argmax logits only.
BlackboxResult verify_blackbox_pvalue(const SequenceModel& model,
                                      const TriggerSet& trigger,
                                      const Dataset& source, const Key* key);

// Exact tail used above, exposed for direct checking.
double binomial_tail_pvalue(std::size_t n, std::size_t matches, double p);

struct CounterfeitStudy {
  double genuine_accuracy = 0.0;
  std::size_t counterfeit_count = 0;
  double counterfeit_mean = 0.0;
  double counterfeit_min = 0.0;
  double counterfeit_max = 0.0;
  std::vector<double> per_counterfeit;
};

// Honest counterfeits: same generation method and dimensions as the
// genuine key, independent seeds. Evaluation fans out in parallel.
CounterfeitStudy counterfeit_study(const SequenceModel& model,
                                   const Key& genuine, std::size_t n_counterfeit,
                                   Rng& rng, const Dataset& ds,
                                   const std::vector<std::size_t>& indices);

struct GateHistogram {
  std::vector<double> bin_left;     // 50 bins over [0,1]
  std::vector<std::size_t> counts;
  std::vector<double> density;
  std::size_t total = 0;

  double mass_above(double threshold) const;
};

// Histogram of all gk_t entries over `steps` timesteps of the key stream.
GateHistogram gate_histogram(const SequenceModel& model, const Key& key,
                             std::size_t steps, std::size_t bins = 50);

std::string gate_histogram_csv(const GateHistogram& genuine,
                               const GateHistogram& counterfeit);

struct SecrecyReport {
  struct Layer {
    std::string name;
    double ks_statistic = 0.0;
  };
  std::vector<Layer> layers;
  double threshold = 0.1;
  bool pass = true;

  std::string to_json() const;
};

// Per-layer two-sample Kolmogorov-Smirnov statistic between matched
// weight tensors of the two models.
SecrecyReport secrecy_check(const SequenceModel& prot,
                            const SequenceModel& baseline,
                            double threshold = 0.1);

struct VerificationReport {
  WhiteboxResult whitebox;
  BlackboxResult blackbox;
  CounterfeitStudy keys;
  std::string to_json() const;
};

}  // namespace gkrnn
