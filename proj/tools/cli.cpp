// gkrnn: train, attack, verify, and inspect key-gated recurrent models.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration error,
// 3 data/checkpoint error, 4 verification check failed.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gkrnn/attacks.hpp"
#include "gkrnn/checkpoint.hpp"
#include "gkrnn/config.hpp"
#include "gkrnn/dataset.hpp"
#include "gkrnn/train.hpp"
#include "gkrnn/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace gkrnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitVerifyFailed = 4;

std::string timestamp_dir_name(const std::string& kind) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  localtime_r(&t, &tm);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &tm);
  return kind + "-" + buf;
}

fs::path prepare_out_dir(std::string out, const std::string& kind) {
  fs::path dir = out.empty() ? fs::path("runs") / timestamp_dir_name(kind)
                             : fs::path(out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
}

// Everything reproducible from the config alone: the dataset, the trigger
// set carved out of it, and the train/val/test split. Every subcommand
// rebuilds this identically so artifacts from separate invocations line up.
struct Experiment {
  Dataset ds;
  TriggerSet trigger;
  SplitIndices split;
};

Experiment prepare_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  Rng rng(cfg.dataset.seed);
  if (cfg.dataset.kind == "synthetic_text") {
    ex.ds = generate_synthetic_text(rng, cfg.dataset.size, cfg.dataset.vocab,
                                    cfg.dataset.classes, cfg.dataset.length_min,
                                    cfg.dataset.length_max);
  } else if (cfg.dataset.kind == "idx_rows") {
    ex.ds = load_idx(cfg.dataset.images_path, cfg.dataset.labels_path);
  } else if (cfg.dataset.kind == "trec_tsv") {
    ex.ds = load_trec_tsv(cfg.dataset.tsv_path);
  } else {
    throw ConfigError("dataset.kind must be synthetic_text, idx_rows or "
                      "trec_tsv, got '" + cfg.dataset.kind + "'");
  }
  if (cfg.dataset.limit > 0 && ex.ds.samples.size() > cfg.dataset.limit) {
    rng.shuffle(ex.ds.samples);
    ex.ds.samples.resize(cfg.dataset.limit);
  }
  ex.trigger = build_trigger_set(ex.ds, cfg.protection.trigger_size, rng);
  ex.split = split_dataset(ex.ds, cfg.dataset.val_frac, cfg.dataset.test_frac, rng);
  return ex;
}

ModelConfig model_config(const ExperimentConfig& cfg, const Dataset& ds) {
  ModelConfig mc;
  mc.cell = cfg.cell_kind();
  mc.bidirectional = cfg.model.bidirectional;
  mc.hidden = cfg.model.hidden;
  mc.classes = cfg.model.classes > 0 ? cfg.model.classes : ds.classes;
  if (ds.tokenized) {
    mc.vocab = ds.vocab;
    mc.input_dim = cfg.model.embed_dim;
  } else {
    mc.vocab = 0;
    mc.input_dim = ds.feat_dim;
  }
  return mc;
}

Key make_key(const ExperimentConfig& cfg, const SequenceModel& model,
             const Dataset& ds) {
  const KeyMethod method = key_method_from_name(cfg.protection.key.method);
  Rng rng(cfg.protection.key.seed);
  if (method == KeyMethod::RandomPatterns)
    return generate_random_key(rng, cfg.protection.key.count,
                               cfg.protection.key.length,
                               model.config().input_dim);
  // token keys: random sentences from the vocabulary, embedded through the
  // model's (initial) embedding table and frozen
  if (!ds.tokenized)
    throw ConfigError("key method '" + cfg.protection.key.method +
                      "' needs a tokenized dataset");
  const std::size_t n_sent =
      method == KeyMethod::FixedKey ? 1 : cfg.protection.key.count;
  std::vector<std::vector<int>> sentences(n_sent);
  for (auto& s : sentences) {
    s.resize(cfg.protection.key.length);
    for (auto& t : s) t = static_cast<int>(1 + rng.next_below(ds.vocab - 1));
  }
  return generate_token_key(method, sentences, model.embedding()->value);
}

struct Loaded {
  SequenceModel model;
  Key key;
  Signature sig;
};

Loaded load_protected(const std::string& path) {
  LoadedModel lm = load_checkpoint(path);
  if (!lm.key || !lm.signature)
    throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                          path + ": checkpoint carries no key/signature "
                                 "(not a protected model)");
  return {std::move(lm.model), std::move(*lm.key), std::move(*lm.signature)};
}

struct Metrics {
  double test_acc = 0.0;
  double trigger_acc = 0.0;
  double sign_acc = 0.0;
};

Metrics measure(const SequenceModel& model, const Key& key, const Signature& sig,
                const Experiment& ex) {
  Metrics m;
  m.test_acc = evaluate(model, ex.ds, ex.split.test, &key);
  Dataset tds = ex.trigger.as_dataset(ex.ds);
  m.trigger_acc = evaluate(model, tds, {}, &key);
  m.sign_acc = verify_whitebox(model, key, sig).bit_accuracy;
  return m;
}

std::size_t steps_per_epoch(const ExperimentConfig& cfg, const Experiment& ex) {
  const std::size_t n = ex.split.train.size();
  const std::size_t b = std::max<std::size_t>(1, cfg.training.batch);
  return (n + b - 1) / b;
}

TrainConfig train_config(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.scheme = cfg.scheme();
  tc.epochs = cfg.training.epochs;
  tc.batch_size = cfg.training.batch;
  tc.trigger_batch = cfg.training.trigger_batch;
  tc.lr = cfg.training.lr;
  tc.sign_loss_weight = cfg.training.sign_loss_weight;
  tc.patience = cfg.training.patience;
  tc.seed = cfg.training.seed;
  return tc;
}

ordered_json epochs_json(const TrainResult& r) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : r.epochs)
    arr.push_back({{"l_k", e.mean_l_k},
                   {"l_x", e.mean_l_x},
                   {"l_r", e.mean_l_r},
                   {"val_accuracy", e.val_accuracy}});
  return arr;
}

int cmd_train(const std::string& config_path, const std::string& out,
              bool with_baseline) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  Experiment ex = prepare_experiment(cfg);
  const fs::path dir = prepare_out_dir(out, "train");
  write_text(dir / "resolved_config.json", cfg.to_json_text());

  SequenceModel model(model_config(cfg, ex.ds));
  Rng mrng(cfg.training.seed);
  model.init(mrng);
  Key key = make_key(cfg, model, ex.ds);
  Signature sig = encode_signature(cfg.protection.signature_text,
                                   model.config().hidden, cfg.protection.gamma);

  TrainResult r = train_model(model, ex.ds, ex.split.train, ex.split.val,
                              &ex.trigger, &key, &sig, train_config(cfg));
  save_checkpoint(model, &key, &sig, (dir / "model.ckpt").string());

  Metrics m = measure(model, key, sig, ex);
  ordered_json metrics;
  metrics["scheme"] = cfg.protection.scheme;
  metrics["steps_run"] = r.steps_run;
  metrics["epochs"] = epochs_json(r);
  metrics["test_accuracy"] = m.test_acc;
  metrics["trigger_accuracy"] = m.trigger_acc;
  metrics["signature_bit_accuracy"] = m.sign_acc;

  if (with_baseline) {
    SequenceModel baseline(model_config(cfg, ex.ds));
    Rng brng(cfg.training.seed);
    baseline.init(brng);
    TrainResult br = train_model(baseline, ex.ds, ex.split.train, ex.split.val,
                                 nullptr, nullptr, nullptr, train_config(cfg));
    save_checkpoint(baseline, nullptr, nullptr, (dir / "baseline.ckpt").string());
    metrics["baseline"] = {
        {"steps_run", br.steps_run},
        {"test_accuracy", evaluate(baseline, ex.ds, ex.split.test, nullptr)}};
  }

  write_text(dir / "metrics.json", metrics.dump(2));
  std::cout << metrics.dump(2) << "\n";
  std::cout << "artifacts: " << dir.string() << "\n";
  return kExitOk;
}

ordered_json report_json(const AttackReport& rep) {
  return ordered_json::parse(rep.to_json());
}

AttackReport make_report(const std::string& kind, const std::string& params,
                         const Metrics& pre, const Metrics& post,
                         std::size_t steps) {
  AttackReport rep;
  rep.kind = kind;
  rep.parameters = params;
  rep.pre_test_acc = pre.test_acc;
  rep.pre_trigger_acc = pre.trigger_acc;
  rep.pre_sign_acc = pre.sign_acc;
  rep.post_test_acc = post.test_acc;
  rep.post_trigger_acc = post.trigger_acc;
  rep.post_sign_acc = post.sign_acc;
  rep.elapsed_steps = steps;
  return rep;
}

int cmd_attack_prune(const std::string& config_path, const std::string& ckpt,
                     const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  Experiment ex = prepare_experiment(cfg);
  const fs::path dir = prepare_out_dir(out, "attack-prune");
  Loaded base = load_protected(ckpt);
  const Metrics pre = measure(base.model, base.key, base.sig, ex);

  ordered_json reports = ordered_json::array();
  std::vector<SweepRow> rows;
  for (double rate : cfg.attack.prune_rates) {
    Loaded victim = load_protected(ckpt);
    prune_global_l1(victim.model, rate);
    const Metrics post = measure(victim.model, victim.key, victim.sig, ex);
    reports.push_back(report_json(make_report(
        "prune", "rate=" + std::to_string(rate), pre, post, 0)));
    rows.push_back({rate, post.test_acc, post.trigger_acc, post.sign_acc});
  }
  write_text(dir / "attack_prune.json", reports.dump(2));
  write_text(dir / "prune_sweep.csv", sweep_csv(rows));
  std::cout << reports.dump(2) << "\n";
  std::cout << "artifacts: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_attack_finetune(const std::string& config_path, const std::string& ckpt,
                        const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  Experiment ex = prepare_experiment(cfg);
  const fs::path dir = prepare_out_dir(out, "attack-finetune");
  Loaded victim = load_protected(ckpt);
  const Metrics pre = measure(victim.model, victim.key, victim.sig, ex);

  const std::size_t budget = static_cast<std::size_t>(std::llround(
      cfg.attack.finetune_fraction *
      static_cast<double>(cfg.training.epochs * steps_per_epoch(cfg, ex))));
  const double lr = cfg.training.lr * cfg.attack.finetune_lr_scale;
  const std::size_t steps =
      finetune_attack(victim.model, ex.ds, ex.split.train, budget,
                      cfg.training.batch, lr, cfg.attack.seed);

  const Metrics post = measure(victim.model, victim.key, victim.sig, ex);
  AttackReport rep = make_report(
      "finetune", "steps=" + std::to_string(steps) + ",lr=" + std::to_string(lr),
      pre, post, steps);
  write_text(dir / "attack_finetune.json", rep.to_json());
  save_checkpoint(victim.model, &victim.key, &victim.sig,
                  (dir / "attacked.ckpt").string());
  std::cout << rep.to_json() << "\n";
  std::cout << "artifacts: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_attack_overwrite(const std::string& config_path, const std::string& ckpt,
                         const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  Experiment ex = prepare_experiment(cfg);
  const fs::path dir = prepare_out_dir(out, "attack-overwrite");
  Loaded victim = load_protected(ckpt);
  const Metrics pre = measure(victim.model, victim.key, victim.sig, ex);

  // the attacker's fresh protection material
  Rng arng(cfg.attack.seed);
  Key new_key = generate_random_key(arng, victim.key.count(),
                                    victim.key.length(), victim.key.feat_dim());
  // attacker's signature, truncated to the model's capacity
  std::string attacker_text = "attacker";
  attacker_text.resize(std::max<std::size_t>(
      1, std::min(attacker_text.size(), victim.model.config().hidden / 8)));
  Signature new_sig = encode_signature(attacker_text,
                                       victim.model.config().hidden,
                                       cfg.protection.gamma);
  // the attacker re-labels copies of their own samples; the trigger owns its
  // inputs, so the split over ex.ds stays valid
  Dataset trigger_pool = ex.ds;
  TriggerSet new_trigger =
      build_trigger_set(trigger_pool, ex.trigger.size(), arng);

  const std::size_t steps = overwrite_attack(
      victim.model, new_key, new_sig, ex.ds, ex.split.train, &new_trigger,
      cfg.attack.overwrite_steps, cfg.training.batch, cfg.training.trigger_batch,
      cfg.training.lr, cfg.attack.seed);

  const Metrics post = measure(victim.model, victim.key, victim.sig, ex);
  AttackReport rep = make_report(
      "overwrite", "steps=" + std::to_string(steps), pre, post, steps);
  ordered_json j = report_json(rep);
  j["attacker"] = {
      {"test_acc", evaluate(victim.model, ex.ds, ex.split.test, &new_key)},
      {"sign_acc",
       verify_whitebox(victim.model, new_key, new_sig).bit_accuracy}};
  write_text(dir / "attack_overwrite.json", j.dump(2));
  save_checkpoint(victim.model, &victim.key, &victim.sig,
                  (dir / "attacked.ckpt").string());
  std::cout << j.dump(2) << "\n";
  std::cout << "artifacts: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_attack_flipsigns(const std::string& config_path, const std::string& ckpt,
                         const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  Experiment ex = prepare_experiment(cfg);
  const fs::path dir = prepare_out_dir(out, "attack-flipsigns");
  Loaded victim = load_protected(ckpt);
  const Metrics pre = measure(victim.model, victim.key, victim.sig, ex);

  FlipResult fr = flip_signs(victim.model, victim.key, victim.sig,
                             cfg.attack.flip_fraction, ex.ds, ex.split.train,
                             &ex.trigger, cfg.attack.flip_step_cap,
                             cfg.training.batch, cfg.training.trigger_batch,
                             cfg.training.lr, cfg.attack.seed);

  const Metrics post = measure(victim.model, victim.key, victim.sig, ex);
  AttackReport rep = make_report(
      "flipsigns", "fraction=" + std::to_string(cfg.attack.flip_fraction),
      pre, post, fr.steps_run);
  ordered_json j = report_json(rep);
  j["final_sign_loss"] = fr.final_sign_loss;
  j["flipped_signature_bit_acc"] =
      verify_whitebox(victim.model, victim.key, fr.flipped).bit_accuracy;
  write_text(dir / "attack_flipsigns.json", j.dump(2));
  save_checkpoint(victim.model, &victim.key, &victim.sig,
                  (dir / "attacked.ckpt").string());
  std::cout << j.dump(2) << "\n";
  std::cout << "artifacts: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_verify_whitebox(const std::string& ckpt, const std::string& out) {
  const fs::path dir = prepare_out_dir(out, "verify-whitebox");
  Loaded lm = load_protected(ckpt);
  WhiteboxResult wb = verify_whitebox(lm.model, lm.key, lm.sig);
  ordered_json j;
  j["expected_text"] = lm.sig.text;
  j["decoded_text"] = wb.decoded_text;
  j["bit_accuracy"] = wb.bit_accuracy;
  j["pass"] = wb.bit_accuracy == 1.0;
  write_text(dir / "whitebox.json", j.dump(2));
  std::cout << j.dump(2) << "\n";
  return j["pass"].get<bool>() ? kExitOk : kExitVerifyFailed;
}

int cmd_verify_blackbox(const std::string& config_path, const std::string& ckpt,
                        double alpha, const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  Experiment ex = prepare_experiment(cfg);
  const fs::path dir = prepare_out_dir(out, "verify-blackbox");
  Loaded lm = load_protected(ckpt);
  BlackboxResult bb = verify_blackbox_pvalue(lm.model, ex.trigger, ex.ds, &lm.key);
  ordered_json j;
  j["matches"] = bb.matches;
  j["total"] = bb.total;
  j["p_value"] = bb.p_value;
  j["alpha"] = alpha;
  j["pass"] = bb.p_value < alpha;
  write_text(dir / "blackbox.json", j.dump(2));
  std::cout << j.dump(2) << "\n";
  return j["pass"].get<bool>() ? kExitOk : kExitVerifyFailed;
}

int cmd_verify_keys(const std::string& config_path, const std::string& ckpt,
                    const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  Experiment ex = prepare_experiment(cfg);
  const fs::path dir = prepare_out_dir(out, "verify-keys");
  Loaded lm = load_protected(ckpt);
  Rng rng(cfg.verify.seed);
  CounterfeitStudy st = counterfeit_study(lm.model, lm.key,
                                          cfg.verify.counterfeit_keys, rng,
                                          ex.ds, ex.split.test);
  ordered_json j;
  j["genuine_accuracy"] = st.genuine_accuracy;
  j["counterfeit_count"] = st.counterfeit_count;
  j["counterfeit_mean"] = st.counterfeit_mean;
  j["counterfeit_min"] = st.counterfeit_min;
  j["counterfeit_max"] = st.counterfeit_max;
  j["per_counterfeit"] = st.per_counterfeit;
  j["pass"] = st.counterfeit_count == 0 || st.genuine_accuracy > st.counterfeit_max;
  write_text(dir / "keys.json", j.dump(2));
  std::cout << j.dump(2) << "\n";
  return j["pass"].get<bool>() ? kExitOk : kExitVerifyFailed;
}

int cmd_verify_secrecy(const std::string& ckpt, const std::string& baseline_ckpt,
                       double threshold, const std::string& out) {
  const fs::path dir = prepare_out_dir(out, "verify-secrecy");
  LoadedModel prot = load_checkpoint(ckpt);
  LoadedModel base = load_checkpoint(baseline_ckpt);
  SecrecyReport rep = secrecy_check(prot.model, base.model, threshold);
  write_text(dir / "secrecy.json", rep.to_json());
  std::cout << rep.to_json() << "\n";
  return rep.pass ? kExitOk : kExitVerifyFailed;
}

int cmd_verify_gates(const std::string& config_path, const std::string& ckpt,
                     const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  const fs::path dir = prepare_out_dir(out, "verify-gates");
  Loaded lm = load_protected(ckpt);
  Rng rng(cfg.verify.seed);
  Key counterfeit = generate_random_key(rng, lm.key.count(), lm.key.length(),
                                        lm.key.feat_dim());
  GateHistogram genuine = gate_histogram(lm.model, lm.key,
                                         cfg.verify.histogram_steps,
                                         cfg.verify.histogram_bins);
  GateHistogram fake = gate_histogram(lm.model, counterfeit,
                                      cfg.verify.histogram_steps,
                                      cfg.verify.histogram_bins);
  write_text(dir / "gates.csv", gate_histogram_csv(genuine, fake));
  ordered_json j;
  j["genuine_mass_above_0.9"] = genuine.mass_above(0.9);
  j["counterfeit_mass_above_0.9"] = fake.mass_above(0.9);
  write_text(dir / "gates.json", j.dump(2));
  std::cout << j.dump(2) << "\n";
  std::cout << "artifacts: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_inspect(const std::string& ckpt) {
  Checkpoint cp = load_checkpoint_raw(ckpt);
  ordered_json j;
  j["cell"] = cp.model_config.cell == CellKind::LSTM ? "lstm" : "gru";
  j["bidirectional"] = cp.model_config.bidirectional;
  j["hidden"] = cp.model_config.hidden;
  j["classes"] = cp.model_config.classes;
  j["input_dim"] = cp.model_config.input_dim;
  j["vocab"] = cp.model_config.vocab;
  ordered_json tensors = ordered_json::array();
  std::size_t total = 0;
  for (const auto& [name, t] : cp.tensors) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"numel", t.numel()}});
    total += t.numel();
  }
  j["tensors"] = tensors;
  j["parameter_count"] = total;
  j["has_key"] = cp.key.has_value();
  if (cp.key)
    j["key"] = {{"method", key_method_name(cp.key->method)},
                {"count", cp.key->count()},
                {"length", cp.key->length()},
                {"feat_dim", cp.key->feat_dim()}};
  j["has_signature"] = cp.signature.has_value();
  if (cp.signature)
    j["signature"] = {{"text", cp.signature->text},
                      {"bits", cp.signature->signs.size()},
                      {"gamma", cp.signature->gamma}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Key-gated recurrent network protection toolkit"};
  app.require_subcommand(1);

  std::string config_path, ckpt, baseline_ckpt, out;
  bool with_baseline = false;
  double alpha = 0.05;
  double secrecy_threshold = 0.1;

  auto* train = app.add_subcommand("train", "Train a protected model");
  train->add_option("--config", config_path, "experiment config JSON")->required();
  train->add_option("--out", out, "artifact directory (default: runs/<stamp>)");
  train->add_flag("--baseline", with_baseline,
                  "also train an unprotected baseline");

  auto* attack = app.add_subcommand("attack", "Run removal attacks");
  attack->require_subcommand(1);
  for (const char* name : {"prune", "finetune", "overwrite", "flipsigns"}) {
    auto* sub = attack->add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config JSON")->required();
    sub->add_option("--checkpoint", ckpt, "protected model checkpoint")->required();
    sub->add_option("--out", out, "artifact directory");
  }

  auto* verify = app.add_subcommand("verify", "Ownership verification");
  verify->require_subcommand(1);
  auto* wb = verify->add_subcommand("whitebox");
  wb->add_option("--checkpoint", ckpt)->required();
  wb->add_option("--out", out);
  auto* bb = verify->add_subcommand("blackbox");
  bb->add_option("--config", config_path)->required();
  bb->add_option("--checkpoint", ckpt)->required();
  bb->add_option("--alpha", alpha, "significance level (default 0.05)");
  bb->add_option("--out", out);
  auto* keys = verify->add_subcommand("keys");
  keys->add_option("--config", config_path)->required();
  keys->add_option("--checkpoint", ckpt)->required();
  keys->add_option("--out", out);
  auto* secrecy = verify->add_subcommand("secrecy");
  secrecy->add_option("--checkpoint", ckpt)->required();
  secrecy->add_option("--baseline", baseline_ckpt)->required();
  secrecy->add_option("--threshold", secrecy_threshold);
  secrecy->add_option("--out", out);
  auto* gates = verify->add_subcommand("gates");
  gates->add_option("--config", config_path)->required();
  gates->add_option("--checkpoint", ckpt)->required();
  gates->add_option("--out", out);

  auto* inspect = app.add_subcommand("inspect", "Describe a checkpoint");
  inspect->add_option("--checkpoint", ckpt)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, out, with_baseline);
    if (attack->parsed()) {
      const std::string sub = attack->get_subcommands().front()->get_name();
      if (sub == "prune") return cmd_attack_prune(config_path, ckpt, out);
      if (sub == "finetune") return cmd_attack_finetune(config_path, ckpt, out);
      if (sub == "overwrite") return cmd_attack_overwrite(config_path, ckpt, out);
      return cmd_attack_flipsigns(config_path, ckpt, out);
    }
    if (verify->parsed()) {
      if (wb->parsed()) return cmd_verify_whitebox(ckpt, out);
      if (bb->parsed()) return cmd_verify_blackbox(config_path, ckpt, alpha, out);
      if (keys->parsed()) return cmd_verify_keys(config_path, ckpt, out);
      if (secrecy->parsed())
        return cmd_verify_secrecy(ckpt, baseline_ckpt, secrecy_threshold, out);
      return cmd_verify_gates(config_path, ckpt, out);
    }
    if (inspect->parsed()) return cmd_inspect(ckpt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
