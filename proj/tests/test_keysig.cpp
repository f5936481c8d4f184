#include <cmath>

#include "doctest.h"
#include "gkrnn/keysig.hpp"
#include "gkrnn/ops.hpp"

using namespace gkrnn;

TEST_CASE("random key generation") {
  Rng rng(123);
  Key key = generate_random_key(rng, 4, 8, 32);  // 1024 entries
  CHECK(key.count() == 4);
  CHECK(key.length() == 8);
  CHECK(key.feat_dim() == 32);
  for (double v : key.sequences.vec()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  // reproducible
  Rng rng2(123);
  Key key2 = generate_random_key(rng2, 4, 8, 32);
  CHECK(key.sequences.vec() == key2.sequences.vec());
  // different seeds differ almost everywhere
  Rng rng3(124);
  Key key3 = generate_random_key(rng3, 4, 8, 32);
  std::size_t diff = 0;
  for (std::size_t i = 0; i < key.sequences.numel(); ++i)
    if (key.sequences[i] != key3.sequences[i]) ++diff;
  CHECK(diff >= key.sequences.numel() * 99 / 100);
}

TEST_CASE("token keys embed sentences") {
  Tensor emb({10, 3});
  for (std::size_t i = 0; i < emb.numel(); ++i) emb[i] = 0.1 * static_cast<double>(i);
  Key key = generate_token_key(KeyMethod::BatchKeys, {{1, 2}, {3, 4}}, emb);
  CHECK(key.count() == 2);
  CHECK(key.length() == 2);
  CHECK(key.step(0, 1)[0] == doctest::Approx(emb.at(2, 0)));
  CHECK_THROWS(generate_token_key(KeyMethod::BatchKeys, {}, emb));
  CHECK_THROWS(generate_token_key(KeyMethod::FixedKey, {{1}, {2}}, emb));
  CHECK_THROWS(generate_token_key(KeyMethod::BatchKeys, {{11}}, emb));
}

TEST_CASE("key space count") {
  // (K*l)^V with K=2, l=3, V=10
  CHECK(key_space_size(2, 3, 10) == doctest::Approx(60466176.0));
}

TEST_CASE("signature encoding") {
  SUBCASE("'p' (112) MSB-first") {
    Signature sig = encode_signature("p", 8);
    const std::vector<int> expect = {-1, +1, +1, +1, -1, -1, -1, -1};
    CHECK(sig.signs == expect);
  }
  SUBCASE("'r' (114)") {
    Signature sig = encode_signature("r", 8);
    const std::vector<int> expect = {-1, +1, +1, +1, -1, -1, +1, -1};
    CHECK(sig.signs == expect);
  }
  SUBCASE("empty string") {
    Signature sig = encode_signature("", 16);
    CHECK(sig.signs.empty());
  }
  SUBCASE("capacity error names N and bits") {
    CHECK_THROWS_WITH_AS(encode_signature("toolong", 32),
                         doctest::Contains("56 bits"), std::invalid_argument);
  }
  SUBCASE("non-ASCII rejected") {
    CHECK_THROWS(encode_signature("\xc3\xa9", 64));
  }
}

TEST_CASE("signature decoding") {
  SUBCASE("hidden-state column decodes to 'p'") {
    Tensor h0({8}, {-0.1939, 0.1820, 0.2064, 0.1648, -0.1795, -0.1670, -0.1778,
                    -0.1711});
    Signature ref = encode_signature("p", 8);
    auto dec = decode_signature(h0, ref);
    CHECK(dec.text == "p");
    CHECK(dec.bit_accuracy == 1.0);
  }
  SUBCASE("positive scaling preserves signs") {
    Signature ref = encode_signature("iv", 16);
    Tensor h0({16});
    for (std::size_t i = 0; i < 16; ++i) h0[i] = 0.5 * ref.signs[i];
    auto dec = decode_signature(h0, ref);
    CHECK(dec.text == "iv");
    CHECK(dec.bit_accuracy == 1.0);
  }
  SUBCASE("random vs random is near 50%") {
    Rng rng(55);
    std::size_t matches = 0;
    const std::size_t bits = 1000;
    for (std::size_t i = 0; i < bits; ++i) {
      const int a = rng.next_double() < 0.5 ? -1 : 1;
      const int b = rng.next_double() < 0.5 ? -1 : 1;
      if (a == b) ++matches;
    }
    const double acc = static_cast<double>(matches) / bits;
    CHECK(acc > 0.45);
    CHECK(acc < 0.55);
  }
  SUBCASE("round trip over printable ASCII") {
    for (char c = 32; c < 127; ++c) {
      const std::string s(1, c);
      Signature sig = encode_signature(s, 64);
      Tensor h0({64});
      for (std::size_t i = 0; i < sig.signs.size(); ++i)
        h0[i] = 0.01 * sig.signs[i] * (1.0 + static_cast<double>(i));
      auto dec = decode_signature(h0, sig);
      CHECK(dec.text == s);
      CHECK(dec.bit_accuracy == 1.0);
    }
  }
}

TEST_CASE("sign loss") {
  SUBCASE("hinge boundary gives zero loss") {
    Signature sig = encode_signature("p", 8);
    Tensor h0({8});
    for (std::size_t i = 0; i < 8; ++i) h0[i] = sig.gamma * sig.signs[i];
    auto res = sign_loss(h0, sig);
    CHECK(res.loss == 0.0);
  }
  SUBCASE("zero state gives bits * gamma") {
    Signature sig = encode_signature("priv", 32);
    Tensor h0({32});
    auto res = sign_loss(h0, sig);
    CHECK(res.loss == doctest::Approx(32 * 0.1).epsilon(1e-12));
  }
  SUBCASE("unconstrained units contribute nothing") {
    Signature sig = encode_signature("p", 16);
    Tensor h0({16});
    for (std::size_t i = 8; i < 16; ++i) h0[i] = -42.0;
    auto res = sign_loss(h0, sig);
    CHECK(res.loss == doctest::Approx(8 * 0.1));
    for (std::size_t i = 8; i < 16; ++i) CHECK(res.grad_h0[i] == 0.0);
  }
  SUBCASE("gradient matches finite differences away from kinks") {
    Rng rng(9);
    Signature sig = encode_signature("pq", 16);
    Tensor h0({16});
    for (auto& v : h0.vec()) v = rng.uniform(-0.5, 0.5);
    // nudge any coordinate sitting near its kink
    for (std::size_t i = 0; i < sig.signs.size(); ++i)
      if (std::abs(sig.gamma - h0[i] * sig.signs[i]) < 1e-3) h0[i] += 0.01;
    auto res = sign_loss(h0, sig);
    Tensor numeric = finite_diff_grad(
        [&](const Tensor& th) { return sign_loss(th, sig).loss; }, h0);
    CHECK(max_rel_err(res.grad_h0, numeric) < 1e-4);
  }
  SUBCASE("non-negative and zero iff all margins met") {
    Rng rng(10);
    Signature sig = encode_signature("ab", 16);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor h0({16});
      for (auto& v : h0.vec()) v = rng.uniform(-0.3, 0.3);
      auto res = sign_loss(h0, sig);
      CHECK(res.loss >= 0.0);
      bool all_met = true;
      for (std::size_t i = 0; i < sig.signs.size(); ++i)
        all_met = all_met && h0[i] * sig.signs[i] >= sig.gamma;
      CHECK((res.loss == 0.0) == all_met);
    }
  }
}
