#include "gkrnn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gkrnn {

WhiteboxResult verify_whitebox(const SequenceModel& model, const Key& key,
                               const Signature& reference) {
  auto kfs = model.key_first_state(key);
  auto dec = decode_signature(kfs.h0_mean, reference);
  return {dec.bit_accuracy, dec.text};
}

double binomial_tail_pvalue(std::size_t n, std::size_t matches, double p) {
  if (matches == 0) return 1.0;
  // sum_{j=matches}^{n} C(n,j) p^j (1-p)^(n-j), accumulated in log space
  long double tail = 0.0L;
  for (std::size_t j = matches; j <= n; ++j) {
    const long double log_term =
        std::lgamma(static_cast<long double>(n) + 1) -
        std::lgamma(static_cast<long double>(j) + 1) -
        std::lgamma(static_cast<long double>(n - j) + 1) +
        static_cast<long double>(j) * std::log(static_cast<long double>(p)) +
        static_cast<long double>(n - j) *
            std::log1p(-static_cast<long double>(p));
    tail += std::exp(log_term);
  }
  return static_cast<double>(std::min(tail, 1.0L));
}

BlackboxResult verify_blackbox_pvalue(const SequenceModel& model,
                                      const TriggerSet& trigger,
                                      const Dataset& source, const Key* key) {
  if (trigger.size() == 0)
    throw std::invalid_argument("verify_blackbox_pvalue: empty trigger set");
  Dataset tds = trigger.as_dataset(source);
  BlackboxResult res;
  res.total = trigger.size();
  // query access only: argmax of logits per sample
  const double acc = evaluate(model, tds, {}, key);
  res.matches =
      static_cast<std::size_t>(std::llround(acc * static_cast<double>(res.total)));
  res.p_value = binomial_tail_pvalue(res.total, res.matches,
                                     1.0 / static_cast<double>(source.classes));
  return res;
}

CounterfeitStudy counterfeit_study(const SequenceModel& model,
                                   const Key& genuine, std::size_t n_counterfeit,
                                   Rng& rng, const Dataset& ds,
                                   const std::vector<std::size_t>& indices) {
  CounterfeitStudy study;
  study.genuine_accuracy = evaluate(model, ds, indices, &genuine);
  study.counterfeit_count = n_counterfeit;
  if (n_counterfeit == 0) return study;

  std::vector<Key> counterfeits;
  counterfeits.reserve(n_counterfeit);
  for (std::size_t i = 0; i < n_counterfeit; ++i) {
    Rng child = rng.fork();
    counterfeits.push_back(generate_random_key(
        child, genuine.count(), genuine.length(), genuine.feat_dim()));
  }

  study.per_counterfeit.resize(n_counterfeit);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < static_cast<long long>(n_counterfeit); ++i)
    study.per_counterfeit[static_cast<std::size_t>(i)] =
        evaluate(model, ds, indices, &counterfeits[static_cast<std::size_t>(i)]);

  study.counterfeit_min = study.per_counterfeit[0];
  study.counterfeit_max = study.per_counterfeit[0];
  double sum = 0.0;
  for (double a : study.per_counterfeit) {
    sum += a;
    study.counterfeit_min = std::min(study.counterfeit_min, a);
    study.counterfeit_max = std::max(study.counterfeit_max, a);
  }
  study.counterfeit_mean = sum / static_cast<double>(n_counterfeit);
  return study;
}

double GateHistogram::mass_above(double threshold) const {
  double mass = 0.0;
  for (std::size_t i = 0; i < bin_left.size(); ++i)
    if (bin_left[i] >= threshold)
      mass += static_cast<double>(counts[i]);
  return total == 0 ? 0.0 : mass / static_cast<double>(total);
}

GateHistogram gate_histogram(const SequenceModel& model, const Key& key,
                             std::size_t steps, std::size_t bins) {
  GateHistogram h;
  h.bin_left.resize(bins);
  h.counts.assign(bins, 0);
  h.density.assign(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i)
    h.bin_left[i] = static_cast<double>(i) / static_cast<double>(bins);

  // The gate depends only on the key stream, so one rollout suffices.
  const CellWeights& w = model.cell_fwd();
  CellState state = CellState::zeros(w.kind, key.count(), model.config().hidden);
  const std::size_t gidx = key_gate_index(w.kind);
  const std::size_t n = model.config().hidden;
  for (std::size_t t = 0; t < steps; ++t) {
    auto res = plain_step(w, key.step_all(t % key.length()), state);
    for (std::size_t j = 0; j < n; ++j) {
      double gk = 0.0;
      for (std::size_t r = 0; r < key.count(); ++r)
        gk += res.trace.gates.at(r, gidx * n + j);
      gk /= static_cast<double>(key.count());
      auto bin = static_cast<std::size_t>(gk * static_cast<double>(bins));
      if (bin >= bins) bin = bins - 1;
      h.counts[bin] += 1;
      h.total += 1;
    }
    state = std::move(res.state);
  }
  for (std::size_t i = 0; i < bins; ++i)
    h.density[i] = static_cast<double>(h.counts[i]) *
                   static_cast<double>(bins) / static_cast<double>(h.total);
  return h;
}

std::string gate_histogram_csv(const GateHistogram& genuine,
                               const GateHistogram& counterfeit) {
  std::ostringstream out;
  out << "bin_left,bin_right,density_genuine,density_counterfeit\n";
  const std::size_t bins = genuine.bin_left.size();
  for (std::size_t i = 0; i < bins; ++i) {
    const double left = genuine.bin_left[i];
    const double right = (i + 1 == bins) ? 1.0 : genuine.bin_left[i + 1];
    out << left << ',' << right << ',' << genuine.density[i] << ','
        << counterfeit.density[i] << '\n';
  }
  return out.str();
}

namespace {

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    // advance past every copy of the smaller value so ties (e.g. comparing
    // a model against itself) keep both empirical CDFs in lockstep
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    const double fa = static_cast<double>(i) / static_cast<double>(a.size());
    const double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

}  // namespace

SecrecyReport secrecy_check(const SequenceModel& prot,
                            const SequenceModel& baseline, double threshold) {
  auto pa = prot.parameters();
  auto pb = baseline.parameters();
  if (pa.size() != pb.size())
    throw std::invalid_argument("secrecy_check: architecture mismatch");
  SecrecyReport rep;
  rep.threshold = threshold;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->name != pb[i]->name ||
        pa[i]->value.shape() != pb[i]->value.shape())
      throw std::invalid_argument("secrecy_check: architecture mismatch at " +
                                  pa[i]->name);
    if (pa[i]->name.find(".b_") != std::string::npos || pa[i]->name == "head.b")
      continue;  // compare weight distributions, not bias vectors
    SecrecyReport::Layer layer;
    layer.name = pa[i]->name;
    layer.ks_statistic = ks_two_sample(pa[i]->value.vec(), pb[i]->value.vec());
    rep.pass = rep.pass && layer.ks_statistic < threshold;
    rep.layers.push_back(std::move(layer));
  }
  return rep;
}

std::string SecrecyReport::to_json() const {
  nlohmann::ordered_json j;
  j["threshold"] = threshold;
  j["pass"] = pass;
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : layers)
    j["layers"].push_back({{"name", l.name}, {"ks_statistic", l.ks_statistic}});
  return j.dump(2);
}

std::string VerificationReport::to_json() const {
  nlohmann::ordered_json j;
  j["whitebox"] = {{"bit_accuracy", whitebox.bit_accuracy},
                   {"decoded_text", whitebox.decoded_text}};
  j["blackbox"] = {{"matches", blackbox.matches},
                   {"total", blackbox.total},
                   {"p_value", blackbox.p_value}};
  j["keys"] = {{"genuine_accuracy", keys.genuine_accuracy},
               {"counterfeit_count", keys.counterfeit_count},
               {"counterfeit_mean", keys.counterfeit_mean},
               {"counterfeit_min", keys.counterfeit_min},
               {"counterfeit_max", keys.counterfeit_max}};
  return j.dump(2);
}

}  // namespace gkrnn
