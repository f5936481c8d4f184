#include "gkrnn/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace gkrnn {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& section) {
  if (!j.is_object())
    throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown config field '" + section + "." + key + "'");
}

template <typename T>
void read(const json& j, const char* name, T& out) {
  if (j.contains(name)) {
    try {
      out = j.at(name).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value for '") + name + "': " + e.what());
    }
  }
}

}  // namespace

CellKind ExperimentConfig::cell_kind() const {
  if (model.cell == "lstm") return CellKind::LSTM;
  if (model.cell == "gru") return CellKind::GRU;
  throw ConfigError("model.cell must be 'lstm' or 'gru', got '" + model.cell +
                    "'");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse failure: ") + e.what());
  }
  reject_unknown(j, {"dataset", "model", "protection", "training", "attack",
                     "verify"},
                 "(root)");
  ExperimentConfig cfg;

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    reject_unknown(d,
                   {"kind", "images_path", "labels_path", "tsv_path", "seed",
                    "size", "vocab", "classes", "length_min", "length_max",
                    "limit", "val_frac", "test_frac"},
                   "dataset");
    read(d, "kind", cfg.dataset.kind);
    read(d, "images_path", cfg.dataset.images_path);
    read(d, "labels_path", cfg.dataset.labels_path);
    read(d, "tsv_path", cfg.dataset.tsv_path);
    read(d, "seed", cfg.dataset.seed);
    read(d, "size", cfg.dataset.size);
    read(d, "vocab", cfg.dataset.vocab);
    read(d, "classes", cfg.dataset.classes);
    read(d, "length_min", cfg.dataset.length_min);
    read(d, "length_max", cfg.dataset.length_max);
    read(d, "limit", cfg.dataset.limit);
    read(d, "val_frac", cfg.dataset.val_frac);
    read(d, "test_frac", cfg.dataset.test_frac);
  }
  if (cfg.dataset.kind != "idx_rows" && cfg.dataset.kind != "trec_tsv" &&
      cfg.dataset.kind != "synthetic_text")
    throw ConfigError("dataset.kind must be idx_rows, trec_tsv or synthetic_text");

  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, {"cell", "bidirectional", "hidden", "embed_dim", "classes"},
                   "model");
    read(m, "cell", cfg.model.cell);
    read(m, "bidirectional", cfg.model.bidirectional);
    read(m, "hidden", cfg.model.hidden);
    read(m, "embed_dim", cfg.model.embed_dim);
    read(m, "classes", cfg.model.classes);
  }
  cfg.cell_kind();  // validates

  if (j.contains("protection")) {
    const auto& p = j["protection"];
    reject_unknown(p, {"scheme", "key", "signature", "trigger_size"},
                   "protection");
    read(p, "scheme", cfg.protection.scheme);
    if (p.contains("key")) {
      reject_unknown(p["key"], {"method", "count", "length", "seed"},
                     "protection.key");
      read(p["key"], "method", cfg.protection.key.method);
      read(p["key"], "count", cfg.protection.key.count);
      read(p["key"], "length", cfg.protection.key.length);
      read(p["key"], "seed", cfg.protection.key.seed);
      key_method_from_name(cfg.protection.key.method);  // validates
    }
    if (p.contains("signature")) {
      reject_unknown(p["signature"], {"text", "gamma"}, "protection.signature");
      read(p["signature"], "text", cfg.protection.signature_text);
      read(p["signature"], "gamma", cfg.protection.gamma);
    }
    read(p, "trigger_size", cfg.protection.trigger_size);
    scheme_from_name(cfg.protection.scheme);  // validates
    if (cfg.protection.gamma <= 0.0)
      throw ConfigError("protection.signature.gamma must be > 0");
  }

  if (j.contains("training")) {
    const auto& t = j["training"];
    reject_unknown(t,
                   {"epochs", "batch", "trigger_batch", "lr",
                    "sign_loss_weight", "patience", "seed"},
                   "training");
    read(t, "epochs", cfg.training.epochs);
    read(t, "batch", cfg.training.batch);
    read(t, "trigger_batch", cfg.training.trigger_batch);
    read(t, "lr", cfg.training.lr);
    read(t, "sign_loss_weight", cfg.training.sign_loss_weight);
    read(t, "patience", cfg.training.patience);
    read(t, "seed", cfg.training.seed);
    if (cfg.training.batch == 0) throw ConfigError("training.batch must be > 0");
    if (cfg.training.trigger_batch > cfg.training.batch)
      throw ConfigError("training.trigger_batch must not exceed training.batch");
  }

  if (j.contains("attack")) {
    const auto& a = j["attack"];
    reject_unknown(a,
                   {"prune_rates", "finetune_fraction", "finetune_lr_scale",
                    "overwrite_steps", "flip_fraction", "flip_step_cap", "seed"},
                   "attack");
    read(a, "prune_rates", cfg.attack.prune_rates);
    read(a, "finetune_fraction", cfg.attack.finetune_fraction);
    read(a, "finetune_lr_scale", cfg.attack.finetune_lr_scale);
    read(a, "overwrite_steps", cfg.attack.overwrite_steps);
    read(a, "flip_fraction", cfg.attack.flip_fraction);
    read(a, "flip_step_cap", cfg.attack.flip_step_cap);
    read(a, "seed", cfg.attack.seed);
  }

  if (j.contains("verify")) {
    const auto& v = j["verify"];
    reject_unknown(v,
                   {"counterfeit_keys", "histogram_bins", "histogram_steps",
                    "secrecy_threshold", "seed"},
                   "verify");
    read(v, "counterfeit_keys", cfg.verify.counterfeit_keys);
    read(v, "histogram_bins", cfg.verify.histogram_bins);
    read(v, "histogram_steps", cfg.verify.histogram_steps);
    read(v, "secrecy_threshold", cfg.verify.secrecy_threshold);
    read(v, "seed", cfg.verify.seed);
  }

  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string ExperimentConfig::to_json_text() const {
  nlohmann::ordered_json j;
  j["dataset"] = {{"kind", dataset.kind},
                  {"images_path", dataset.images_path},
                  {"labels_path", dataset.labels_path},
                  {"tsv_path", dataset.tsv_path},
                  {"seed", dataset.seed},
                  {"size", dataset.size},
                  {"vocab", dataset.vocab},
                  {"classes", dataset.classes},
                  {"length_min", dataset.length_min},
                  {"length_max", dataset.length_max},
                  {"limit", dataset.limit},
                  {"val_frac", dataset.val_frac},
                  {"test_frac", dataset.test_frac}};
  j["model"] = {{"cell", model.cell},
                {"bidirectional", model.bidirectional},
                {"hidden", model.hidden},
                {"embed_dim", model.embed_dim},
                {"classes", model.classes}};
  j["protection"] = {{"scheme", protection.scheme},
                     {"key",
                      {{"method", protection.key.method},
                       {"count", protection.key.count},
                       {"length", protection.key.length},
                       {"seed", protection.key.seed}}},
                     {"signature",
                      {{"text", protection.signature_text},
                       {"gamma", protection.gamma}}},
                     {"trigger_size", protection.trigger_size}};
  j["training"] = {{"epochs", training.epochs},
                   {"batch", training.batch},
                   {"trigger_batch", training.trigger_batch},
                   {"lr", training.lr},
                   {"sign_loss_weight", training.sign_loss_weight},
                   {"patience", training.patience},
                   {"seed", training.seed}};
  j["attack"] = {{"prune_rates", attack.prune_rates},
                 {"finetune_fraction", attack.finetune_fraction},
                 {"finetune_lr_scale", attack.finetune_lr_scale},
                 {"overwrite_steps", attack.overwrite_steps},
                 {"flip_fraction", attack.flip_fraction},
                 {"flip_step_cap", attack.flip_step_cap},
                 {"seed", attack.seed}};
  j["verify"] = {{"counterfeit_keys", verify.counterfeit_keys},
                 {"histogram_bins", verify.histogram_bins},
                 {"histogram_steps", verify.histogram_steps},
                 {"secrecy_threshold", verify.secrecy_threshold},
                 {"seed", verify.seed}};
  return j.dump(2);
}

}  // namespace gkrnn
