#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "gkrnn/keysig.hpp"
#include "gkrnn/model.hpp"
#include "gkrnn/train.hpp"

namespace gkrnn {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Experiment configuration, parsed from JSON with unknown-field rejection.
// All defaults are materialized so the emitted resolved config fully
// describes the run.
struct ExperimentConfig {
  struct DatasetSection {
    std::string kind = "synthetic_text";  // idx_rows | trec_tsv | synthetic_text
    std::string images_path, labels_path, tsv_path;
    std::uint64_t seed = 1;
    std::size_t size = 3000;       // synthetic_text
    std::size_t vocab = 50;        // synthetic_text
    std::size_t classes = 6;       // synthetic_text
    std::size_t length_min = 8;    // synthetic_text
    std::size_t length_max = 16;   // synthetic_text
    std::size_t limit = 0;         // cap on samples after loading (0 = all)
    double val_frac = 0.1;
    double test_frac = 0.2;
  } dataset;

  struct ModelSection {
    std::string cell = "lstm";  // lstm | gru
    bool bidirectional = false;
    std::size_t hidden = 48;
    std::size_t embed_dim = 16;  // token tasks; feature width comes from data
    std::size_t classes = 0;     // 0 = from dataset
  } model;

  struct KeySection {
    std::string method = "random_patterns";
    std::size_t count = 4;   // K
    std::size_t length = 8;  // l
    std::uint64_t seed = 7;
  };

  struct ProtectionSection {
    std::string scheme = "public";  // public | private
    KeySection key;
    std::string signature_text = "priv";
    double gamma = 0.1;
    std::size_t trigger_size = 50;
  } protection;

  struct TrainingSection {
    std::size_t epochs = 5;
    std::size_t batch = 32;
    std::size_t trigger_batch = 4;
    double lr = 1e-3;
    double sign_loss_weight = 1.0;
    std::size_t patience = 5;
    std::uint64_t seed = 1;
  } training;

  struct AttackSection {
    std::vector<double> prune_rates = {0.0, 0.2, 0.4, 0.6};
    double finetune_fraction = 0.2;  // of original training steps
    double finetune_lr_scale = 0.1;
    std::size_t overwrite_steps = 200;
    double flip_fraction = 0.4;
    std::size_t flip_step_cap = 200;
    std::uint64_t seed = 99;
  } attack;

  struct VerifySection {
    std::size_t counterfeit_keys = 50;
    std::size_t histogram_bins = 50;
    std::size_t histogram_steps = 28;
    double secrecy_threshold = 0.1;
    std::uint64_t seed = 17;
  } verify;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  std::string to_json_text() const;  // fully resolved

  Scheme scheme() const { return scheme_from_name(protection.scheme); }
  CellKind cell_kind() const;
};

}  // namespace gkrnn
