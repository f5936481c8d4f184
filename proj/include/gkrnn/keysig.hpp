#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gkrnn/rng.hpp"
#include "gkrnn/tensor.hpp"

namespace gkrnn {

enum class KeyMethod { RandomPatterns, FixedKey, BatchKeys };

std::string key_method_name(KeyMethod m);
KeyMethod key_method_from_name(const std::string& s);

// A batch of K secret key sequences, each l timesteps of d features.
struct Key {
  Tensor sequences;  // [K, l, d]
  KeyMethod method = KeyMethod::RandomPatterns;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> token_ids;  // FixedKey/BatchKeys provenance

  std::size_t count() const { return sequences.dim(0); }
  std::size_t length() const { return sequences.dim(1); }
  std::size_t feat_dim() const { return sequences.dim(2); }

  // Key vector for key row k at (0-based) timestep t, as [1, d] view copy.
  Tensor step(std::size_t k, std::size_t t) const;
  // All K key vectors at timestep t as [K, d].
  Tensor step_all(std::size_t t) const;
};

// RandomPatterns: entries uniform in [-1, 1].
Key generate_random_key(Rng& rng, std::size_t count, std::size_t length,
                        std::size_t feat_dim);

// FixedKey / BatchKeys: token sentences mapped through an embedding
// matrix [V, d] and frozen. FixedKey takes exactly one sentence.
Key generate_token_key(KeyMethod method, const std::vector<std::vector<int>>& sentences,
                       const Tensor& embedding);

// Number of possible key combinations for batch keys: (K*l)^V.
double key_space_size(std::size_t count, std::size_t length, std::size_t vocab);

// +/-1 sign pattern carrying an ASCII ownership string.
struct Signature {
  std::string text;
  std::vector<int> signs;  // 8 per character, MSB first, bit 1 -> +1
  double gamma = 0.1;
};

// Throws if 8*len(text) exceeds the capacity N or text is not 7-bit ASCII.
Signature encode_signature(const std::string& text, std::size_t hidden_units,
                           double gamma = 0.1);

struct DecodeResult {
  std::string text;
  double bit_accuracy = 0.0;  // vs. the reference signature
  std::vector<int> signs;
};

// Reads signs off the first 8*text_len units of h0 (zero counts as -1) and
// decodes 8 bits per character, MSB first.
DecodeResult decode_signature(const Tensor& h0, const Signature& reference);

struct SignLossResult {
  double loss = 0.0;
  Tensor grad_h0;
};

// Hinge sign loss: sum_i max(gamma - h0_i * s_i, 0) over the constrained
// units; unconstrained units contribute nothing.
SignLossResult sign_loss(const Tensor& h0, const Signature& sig);

}  // namespace gkrnn
