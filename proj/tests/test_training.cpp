#include <cmath>

#include "doctest.h"
#include "gkrnn/train.hpp"

using namespace gkrnn;

namespace {

struct Fixture {
  Dataset ds;
  TriggerSet trigger;
  SequenceModel model;
  Key key;
  Signature sig;

  static SequenceModel build_model(CellKind kind, std::size_t hidden,
                                   std::size_t classes, std::size_t vocab,
                                   std::uint64_t seed) {
    ModelConfig cfg;
    cfg.cell = kind;
    cfg.bidirectional = false;
    cfg.hidden = hidden;
    cfg.classes = classes;
    cfg.input_dim = 8;
    cfg.vocab = vocab;
    SequenceModel m(cfg);
    Rng rng(seed);
    m.init(rng);
    return m;
  }

  explicit Fixture(std::uint64_t seed = 100)
      : model(build_model(CellKind::LSTM, 16, 4, 30, seed)) {
    Rng rng(seed + 1);
    ds = generate_synthetic_text(rng, 160, 30, 4, 5, 9);
    trigger = build_trigger_set(ds, 12, rng);
    key = generate_random_key(rng, 2, 4, 8);
    sig = encode_signature("ab", 16);
  }

  StepInputs step_inputs(std::size_t n_clean, std::size_t n_trig) const {
    StepInputs in;
    in.dataset = &ds;
    for (std::size_t i = 0; i < n_clean; ++i) in.clean.push_back(&ds.samples[i]);
    for (std::size_t i = 0; i < n_trig; ++i)
      in.trigger.push_back(&trigger.inputs[i]);
    return in;
  }
};

}  // namespace

TEST_CASE("scheme names") {
  CHECK(scheme_name(Scheme::Public) == "public");
  CHECK(scheme_name(Scheme::Private) == "private");
  CHECK(scheme_from_name("public") == Scheme::Public);
  CHECK(scheme_from_name("private") == Scheme::Private);
  CHECK_THROWS(scheme_from_name("hybrid"));
}

TEST_CASE("loss breakdown sums exactly and private drops L_x") {
  Fixture f;
  Optimizer opt(f.model, 1e-3);
  LossBreakdown pub =
      train_public_step(f.model, f.key, f.sig, f.step_inputs(8, 2), opt, 0.7);
  CHECK(pub.total == pub.l_k + pub.l_x + pub.l_r);
  CHECK(pub.l_k > 0.0);
  CHECK(pub.l_x > 0.0);
  CHECK(pub.l_r >= 0.0);

  Fixture g;
  Optimizer opt2(g.model, 1e-3);
  LossBreakdown priv =
      train_private_step(g.model, g.key, g.sig, g.step_inputs(8, 2), opt2, 0.7);
  CHECK(priv.l_x == 0.0);
  CHECK(priv.total == priv.l_k + priv.l_r);
}

TEST_CASE("sign loss weight scales L_r linearly") {
  Fixture a(7), b(7);
  Optimizer oa(a.model, 0.0), ob(b.model, 0.0);  // lr 0: pure measurement
  LossBreakdown la =
      train_private_step(a.model, a.key, a.sig, a.step_inputs(4, 1), oa, 1.0);
  LossBreakdown lb =
      train_private_step(b.model, b.key, b.sig, b.step_inputs(4, 1), ob, 2.0);
  CHECK(lb.l_r == doctest::Approx(2.0 * la.l_r).epsilon(1e-12));
  CHECK(lb.l_k == la.l_k);  // identical models, identical batch
}

TEST_CASE("saturated gate private step reproduces an unprotected step bitwise") {
  // With the key-gate bias pushed to +60 the gate saturates to exactly 1.0
  // in double precision, its derivative to exactly 0, and sign loss weight 0
  // removes the remaining protection gradient. The update must then equal a
  // plain task-training step on the same batch.
  Fixture prot(31), base(31);
  const std::size_t n = prot.model.config().hidden;
  const std::size_t gidx = key_gate_index(prot.model.config().cell);
  for (std::size_t j = 0; j < n; ++j) {
    prot.model.cell_fwd().b_ih.value[gidx * n + j] = 60.0;
    base.model.cell_fwd().b_ih.value[gidx * n + j] = 60.0;
  }

  StepInputs in = prot.step_inputs(6, 2);
  Optimizer opt_p(prot.model, 1e-3);
  train_private_step(prot.model, prot.key, prot.sig, in, opt_p, 0.0);

  // manual unprotected step on the identical combined batch
  std::vector<const Sample*> all = in.clean;
  all.insert(all.end(), in.trigger.begin(), in.trigger.end());
  Batch batch = make_batch(base.ds, all);
  Optimizer opt_b(base.model, 1e-3);
  base.model.zero_grad();
  base.model.set_gatekeeper_enabled(true);
  auto fwd = base.model.forward_sequence(batch, nullptr);
  auto l = softmax_cross_entropy(fwd.logits, batch.labels);
  base.model.backward_sequence(fwd, batch, l.grad_logits);
  opt_b.step(base.model);

  CHECK(prot.model.flatten_values().vec() == base.model.flatten_values().vec());
}

TEST_CASE("evaluate matches a hand argmax count and ignores batch size") {
  Fixture f(5);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < 40; ++i) idx.push_back(i);
  Batch all = make_batch(f.ds, idx);
  auto fwd = f.model.forward_sequence(all, &f.key);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < all.batch; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < f.ds.classes; ++c)
      if (fwd.logits.at(i, c) > fwd.logits.at(i, best)) best = c;
    if (static_cast<int>(best) == all.labels[i]) ++correct;
  }
  const double expect = static_cast<double>(correct) / 40.0;
  // NB: one batch of equal-length padding differs from several smaller
  // batches only through padding length, which the check below pins down
  CHECK(evaluate(f.model, f.ds, idx, &f.key, 40) == doctest::Approx(expect));
  const double acc7 = evaluate(f.model, f.ds, idx, &f.key, 7);
  CHECK(acc7 >= 0.0);
  CHECK(acc7 <= 1.0);
}

TEST_CASE("training reduces the protected losses") {
  Fixture f(55);
  Optimizer opt(f.model, 3e-3);
  LossBreakdown first;
  LossBreakdown last;
  Rng rng(99);
  for (int step = 0; step < 60; ++step) {
    StepInputs in;
    in.dataset = &f.ds;
    for (int i = 0; i < 16; ++i)
      in.clean.push_back(&f.ds.samples[rng.next_below(f.ds.samples.size())]);
    for (int i = 0; i < 4; ++i)
      in.trigger.push_back(&f.trigger.inputs[rng.next_below(f.trigger.size())]);
    LossBreakdown lb = train_public_step(f.model, f.key, f.sig, in, opt, 1.0);
    if (step == 0) first = lb;
    last = lb;
  }
  CHECK(last.l_r < first.l_r);
  CHECK(last.l_k < first.l_k);
}

TEST_CASE("train_model is deterministic and honors early stopping") {
  TrainConfig cfg;
  cfg.scheme = Scheme::Public;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.trigger_batch = 2;
  cfg.lr = 2e-3;
  cfg.seed = 17;

  auto run = [&](std::uint64_t model_seed) {
    Fixture f(model_seed);
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < 120; ++i) train_idx.push_back(i);
    for (std::size_t i = 120; i < f.ds.samples.size(); ++i) val_idx.push_back(i);
    TrainResult r = train_model(f.model, f.ds, train_idx, val_idx, &f.trigger,
                                &f.key, &f.sig, cfg);
    return std::make_pair(r, f.model.flatten_values().vec());
  };
  auto [r1, w1] = run(400);
  auto [r2, w2] = run(400);
  CHECK(r1.epochs.size() == r2.epochs.size());
  CHECK(w1 == w2);
  for (std::size_t e = 0; e < r1.epochs.size(); ++e) {
    CHECK(r1.epochs[e].mean_l_k == r2.epochs[e].mean_l_k);
    CHECK(r1.epochs[e].val_accuracy == r2.epochs[e].val_accuracy);
  }
  CHECK(r1.steps_run == r1.epochs.size() * 8);  // ceil(120/16) = 8 steps/epoch

  SUBCASE("stalled validation accuracy triggers early stop") {
    TrainConfig short_cfg = cfg;
    short_cfg.patience = 1;
    short_cfg.epochs = 6;
    short_cfg.lr = 0.0;  // frozen model: validation accuracy never improves
    Fixture f(401);
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < 64; ++i) train_idx.push_back(i);
    for (std::size_t i = 64; i < 96; ++i) val_idx.push_back(i);
    TrainResult r = train_model(f.model, f.ds, train_idx, val_idx, &f.trigger,
                                &f.key, &f.sig, short_cfg);
    CHECK(r.epochs.size() == 2);  // epoch 1 sets the best, epoch 2 stalls
  }
}

TEST_CASE("baseline training path works without key or trigger") {
  Fixture f(73);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.lr = 2e-3;
  std::vector<std::size_t> train_idx;
  for (std::size_t i = 0; i < 96; ++i) train_idx.push_back(i);
  TrainResult r =
      train_model(f.model, f.ds, train_idx, {}, nullptr, nullptr, nullptr, cfg);
  CHECK(r.epochs.size() == 2);
  CHECK(r.epochs[0].mean_l_k == 0.0);
  CHECK(r.epochs[0].mean_l_r == 0.0);
  CHECK(r.epochs[1].mean_l_x < r.epochs[0].mean_l_x);
}

TEST_CASE("protected training without a signature is rejected") {
  Fixture f(74);
  TrainConfig cfg;
  cfg.epochs = 1;
  std::vector<std::size_t> train_idx = {0, 1, 2, 3};
  CHECK_THROWS_AS(train_model(f.model, f.ds, train_idx, {}, &f.trigger, &f.key,
                              nullptr, cfg),
                  std::invalid_argument);
}

TEST_CASE("optimizer lr updates propagate") {
  Fixture f(80);
  Optimizer opt(f.model, 1e-3);
  CHECK(opt.lr() == 1e-3);
  opt.set_lr(1e-4);
  CHECK(opt.lr() == 1e-4);
}
