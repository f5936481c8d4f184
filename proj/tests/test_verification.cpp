#include <cmath>

#include "doctest.h"
#include "gkrnn/verify.hpp"

using namespace gkrnn;

namespace {

SequenceModel small_model(std::uint64_t seed, std::size_t hidden = 12,
                          std::size_t classes = 5, std::size_t vocab = 30) {
  ModelConfig cfg;
  cfg.cell = CellKind::LSTM;
  cfg.hidden = hidden;
  cfg.classes = classes;
  cfg.input_dim = 6;
  cfg.vocab = vocab;
  SequenceModel m(cfg);
  Rng rng(seed);
  m.init(rng);
  return m;
}

// Independent tail oracle: exact distribution of #successes by dynamic
// programming over n Bernoulli(p) trials, then a plain tail sum.
double dp_tail(std::size_t n, std::size_t matches, double p) {
  std::vector<long double> dist = {1.0L};
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<long double> next(dist.size() + 1, 0.0L);
    for (std::size_t k = 0; k < dist.size(); ++k) {
      next[k] += dist[k] * (1.0L - static_cast<long double>(p));
      next[k + 1] += dist[k] * static_cast<long double>(p);
    }
    dist = std::move(next);
  }
  long double tail = 0.0L;
  for (std::size_t k = matches; k <= n; ++k) tail += dist[k];
  return static_cast<double>(tail);
}

}  // namespace

TEST_CASE("binomial tail p-value") {
  SUBCASE("matches exact dynamic-programming enumeration") {
    for (std::size_t n : {1, 5, 12}) {
      for (double p : {1.0 / 6.0, 0.25, 0.5}) {
        for (std::size_t m = 0; m <= n; ++m) {
          const double got = binomial_tail_pvalue(n, m, p);
          const double want = dp_tail(n, m, p);
          CHECK(got == doctest::Approx(want).epsilon(1e-10));
        }
      }
    }
  }
  SUBCASE("zero matches is certain") {
    CHECK(binomial_tail_pvalue(50, 0, 0.2) == 1.0);
  }
  SUBCASE("all matches is p^n") {
    CHECK(binomial_tail_pvalue(10, 10, 1.0 / 6.0) ==
          doctest::Approx(std::pow(1.0 / 6.0, 10)).epsilon(1e-10));
  }
  SUBCASE("monotone decreasing in matches") {
    double prev = 2.0;
    for (std::size_t m = 0; m <= 30; ++m) {
      const double pv = binomial_tail_pvalue(30, m, 0.25);
      CHECK(pv <= prev);
      prev = pv;
    }
  }
  SUBCASE("never exceeds 1") {
    CHECK(binomial_tail_pvalue(100, 1, 0.999) <= 1.0);
  }
}

TEST_CASE("whitebox verification decodes off the key stream") {
  SequenceModel m = small_model(1);
  Rng rng(2);
  Key key = generate_random_key(rng, 3, 4, 6);
  Signature sig = encode_signature("a", 12);
  WhiteboxResult wb = verify_whitebox(m, key, sig);
  // equals decoding key_first_state directly
  auto kfs = m.key_first_state(key);
  auto dec = decode_signature(kfs.h0_mean, sig);
  CHECK(wb.bit_accuracy == dec.bit_accuracy);
  CHECK(wb.decoded_text == dec.text);
  CHECK(wb.bit_accuracy >= 0.0);
  CHECK(wb.bit_accuracy <= 1.0);
}

TEST_CASE("blackbox verification with a constant-prediction model") {
  // zero all weights and set only the head bias: argmax is class 2 on any
  // input, so trigger matches are countable by hand
  SequenceModel m = small_model(3);
  Tensor zeros({m.parameter_count()});
  m.unflatten_values(zeros);
  m.head_bias().value[2] = 5.0;

  Rng rng(4);
  Dataset ds = generate_synthetic_text(rng, 120, 30, 5, 5, 8);
  TriggerSet trigger = build_trigger_set(ds, 30, rng);
  std::size_t expect_matches = 0;
  for (int lab : trigger.assigned_labels)
    if (lab == 2) ++expect_matches;

  Key key = generate_random_key(rng, 2, 3, 6);
  BlackboxResult bb = verify_blackbox_pvalue(m, trigger, ds, &key);
  CHECK(bb.total == 30);
  CHECK(bb.matches == expect_matches);
  CHECK(bb.p_value ==
        doctest::Approx(binomial_tail_pvalue(30, expect_matches, 0.2)));

  SUBCASE("empty trigger set rejected") {
    TriggerSet empty;
    CHECK_THROWS(verify_blackbox_pvalue(m, empty, ds, &key));
  }
}

TEST_CASE("counterfeit study") {
  SequenceModel m = small_model(5);
  Rng rng(6);
  Dataset ds = generate_synthetic_text(rng, 60, 30, 5, 5, 8);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) idx.push_back(i);
  Key genuine = generate_random_key(rng, 2, 3, 6);

  SUBCASE("zero counterfeits") {
    Rng r2(7);
    CounterfeitStudy st = counterfeit_study(m, genuine, 0, r2, ds, idx);
    CHECK(st.counterfeit_count == 0);
    CHECK(st.per_counterfeit.empty());
    CHECK(st.genuine_accuracy == evaluate(m, ds, idx, &genuine));
  }
  SUBCASE("summary statistics are consistent and deterministic") {
    Rng ra(8), rb(8);
    CounterfeitStudy s1 = counterfeit_study(m, genuine, 12, ra, ds, idx);
    CounterfeitStudy s2 = counterfeit_study(m, genuine, 12, rb, ds, idx);
    CHECK(s1.per_counterfeit == s2.per_counterfeit);  // parallel fan-out stable
    REQUIRE(s1.per_counterfeit.size() == 12);
    double mn = 1e9, mx = -1e9, sum = 0;
    for (double a : s1.per_counterfeit) {
      mn = std::min(mn, a);
      mx = std::max(mx, a);
      sum += a;
    }
    CHECK(s1.counterfeit_min == mn);
    CHECK(s1.counterfeit_max == mx);
    CHECK(s1.counterfeit_mean == doctest::Approx(sum / 12.0));
    CHECK(mn >= 0.0);
    CHECK(mx <= 1.0);
  }
}

TEST_CASE("gate histogram") {
  SequenceModel m = small_model(9);
  Rng rng(10);
  Key key = generate_random_key(rng, 2, 4, 6);
  GateHistogram h = gate_histogram(m, key, 20);
  CHECK(h.bin_left.size() == 50);
  CHECK(h.total == 20 * 12);  // steps * hidden
  std::size_t count_sum = 0;
  double density_sum = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    count_sum += h.counts[i];
    density_sum += h.density[i];
  }
  CHECK(count_sum == h.total);
  CHECK(density_sum * (1.0 / 50.0) == doctest::Approx(1.0));
  CHECK(h.mass_above(0.0) == 1.0);
  CHECK(h.mass_above(1.0) == doctest::Approx(0.0));

  // mass above t equals a direct count over the same bins
  double manual = 0.0;
  for (std::size_t i = 25; i < 50; ++i) manual += static_cast<double>(h.counts[i]);
  CHECK(h.mass_above(0.5) == doctest::Approx(manual / static_cast<double>(h.total)));

  const std::string csv = gate_histogram_csv(h, h);
  CHECK(csv.rfind("bin_left,bin_right,density_genuine,density_counterfeit", 0) == 0);
  std::size_t lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 51);  // header + 50 bins
}

TEST_CASE("secrecy check") {
  SequenceModel a = small_model(11);

  SUBCASE("a model against itself passes with statistic 0") {
    SecrecyReport rep = secrecy_check(a, a, 0.1);
    CHECK(rep.pass);
    for (const auto& layer : rep.layers) CHECK(layer.ks_statistic == 0.0);
    CHECK(!rep.layers.empty());
    // only weight matrices are compared
    for (const auto& layer : rep.layers) {
      CHECK(layer.name.find(".b_") == std::string::npos);
      CHECK(layer.name != "head.b");
    }
  }
  SUBCASE("a shifted counterpart fails with statistic 1") {
    SequenceModel b = small_model(11);
    Tensor vals = b.flatten_values();
    for (auto& v : vals.vec()) v += 10.0;
    b.unflatten_values(vals);
    SecrecyReport rep = secrecy_check(a, b, 0.1);
    CHECK_FALSE(rep.pass);
    for (const auto& layer : rep.layers)
      CHECK(layer.ks_statistic == doctest::Approx(1.0));
  }
  SUBCASE("independently initialized models look alike") {
    SequenceModel b = small_model(99);
    // same uniform init family; the threshold is loose here because the
    // toy model's smallest layer holds only 60 entries
    SecrecyReport rep = secrecy_check(a, b, 0.3);
    CHECK(rep.pass);
  }
  SUBCASE("report serializes") {
    SecrecyReport rep = secrecy_check(a, a, 0.1);
    const std::string js = rep.to_json();
    CHECK(js.find("\"pass\"") != std::string::npos);
    CHECK(js.find("\"layers\"") != std::string::npos);
  }
}

TEST_CASE("verification report serializes") {
  VerificationReport rep;
  rep.whitebox = {1.0, "owner"};
  rep.blackbox = {28, 30, 1e-20};
  rep.keys.genuine_accuracy = 0.97;
  rep.keys.counterfeit_count = 2;
  rep.keys.per_counterfeit = {0.2, 0.3};
  const std::string js = rep.to_json();
  CHECK(js.find("\"whitebox\"") != std::string::npos);
  CHECK(js.find("\"blackbox\"") != std::string::npos);
  CHECK(js.find("owner") != std::string::npos);
}
