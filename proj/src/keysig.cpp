#include "gkrnn/keysig.hpp"

#include <cmath>
#include <stdexcept>

namespace gkrnn {

std::string key_method_name(KeyMethod m) {
  switch (m) {
    case KeyMethod::RandomPatterns: return "random_patterns";
    case KeyMethod::FixedKey: return "fixed_key";
    case KeyMethod::BatchKeys: return "batch_keys";
  }
  return "?";
}

KeyMethod key_method_from_name(const std::string& s) {
  if (s == "random_patterns") return KeyMethod::RandomPatterns;
  if (s == "fixed_key") return KeyMethod::FixedKey;
  if (s == "batch_keys") return KeyMethod::BatchKeys;
  throw std::invalid_argument("unknown key method: " + s);
}

Tensor Key::step(std::size_t k, std::size_t t) const {
  const std::size_t d = feat_dim();
  Tensor out({1, d});
  const double* src = sequences.data() + (k * length() + t) * d;
  for (std::size_t i = 0; i < d; ++i) out[i] = src[i];
  return out;
}

Tensor Key::step_all(std::size_t t) const {
  const std::size_t d = feat_dim();
  const std::size_t kk = count();
  Tensor out({kk, d});
  for (std::size_t k = 0; k < kk; ++k) {
    const double* src = sequences.data() + (k * length() + t) * d;
    for (std::size_t i = 0; i < d; ++i) out.at(k, i) = src[i];
  }
  return out;
}

Key generate_random_key(Rng& rng, std::size_t count, std::size_t length,
                        std::size_t feat_dim) {
  if (count == 0 || length == 0 || feat_dim == 0)
    throw std::invalid_argument("generate_random_key: dimensions must be positive");
  Key key;
  key.method = KeyMethod::RandomPatterns;
  key.sequences = Tensor({count, length, feat_dim});
  for (auto& v : key.sequences.vec()) v = rng.uniform(-1.0, 1.0);
  return key;
}

Key generate_token_key(KeyMethod method,
                       const std::vector<std::vector<int>>& sentences,
                       const Tensor& embedding) {
  if (sentences.empty())
    throw std::invalid_argument("generate_token_key: empty sentence corpus");
  if (method == KeyMethod::FixedKey && sentences.size() != 1)
    throw std::invalid_argument("generate_token_key: fixed_key takes one sentence");
  if (method == KeyMethod::RandomPatterns)
    throw std::invalid_argument("generate_token_key: use generate_random_key");
  const std::size_t len = sentences.front().size();
  if (len == 0) throw std::invalid_argument("generate_token_key: empty sentence");
  for (const auto& s : sentences)
    if (s.size() != len)
      throw std::invalid_argument("generate_token_key: sentences must share length");
  const std::size_t vocab = embedding.dim(0);
  const std::size_t d = embedding.dim(1);

  Key key;
  key.method = method;
  key.token_ids = sentences;
  key.sequences = Tensor({sentences.size(), len, d});
  for (std::size_t k = 0; k < sentences.size(); ++k)
    for (std::size_t t = 0; t < len; ++t) {
      const int tok = sentences[k][t];
      if (tok < 0 || static_cast<std::size_t>(tok) >= vocab)
        throw std::out_of_range("generate_token_key: token id out of vocabulary");
      double* dst = key.sequences.data() + (k * len + t) * d;
      const double* src = embedding.data() + static_cast<std::size_t>(tok) * d;
      for (std::size_t i = 0; i < d; ++i) dst[i] = src[i];
    }
  return key;
}

double key_space_size(std::size_t count, std::size_t length, std::size_t vocab) {
  return std::pow(static_cast<double>(count * length), static_cast<double>(vocab));
}

Signature encode_signature(const std::string& text, std::size_t hidden_units,
                           double gamma) {
  if (8 * text.size() > hidden_units)
    throw std::invalid_argument(
        "signature capacity exceeded: need " + std::to_string(8 * text.size()) +
        " bits but model has " + std::to_string(hidden_units) + " hidden units");
  Signature sig;
  sig.text = text;
  sig.gamma = gamma;
  sig.signs.reserve(8 * text.size());
  for (char ch : text) {
    const auto code = static_cast<unsigned char>(ch);
    if (code > 127)
      throw std::invalid_argument("signature text must be 7-bit ASCII");
    for (int bit = 7; bit >= 0; --bit)
      sig.signs.push_back((code >> bit) & 1 ? +1 : -1);
  }
  return sig;
}

DecodeResult decode_signature(const Tensor& h0, const Signature& reference) {
  const std::size_t bits = reference.signs.size();
  if (h0.numel() < bits)
    throw std::invalid_argument("decode_signature: hidden state shorter than signature");
  DecodeResult res;
  res.signs.reserve(bits);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < bits; ++i) {
    const int s = h0[i] > 0.0 ? +1 : -1;
    res.signs.push_back(s);
    if (s == reference.signs[i]) ++matches;
  }
  res.bit_accuracy = bits == 0 ? 1.0 : static_cast<double>(matches) / bits;
  for (std::size_t c = 0; c < bits / 8; ++c) {
    unsigned code = 0;
    for (std::size_t b = 0; b < 8; ++b)
      code = (code << 1) | (res.signs[c * 8 + b] > 0 ? 1u : 0u);
    res.text.push_back(static_cast<char>(code));
  }
  return res;
}

SignLossResult sign_loss(const Tensor& h0, const Signature& sig) {
  const std::size_t bits = sig.signs.size();
  if (h0.numel() < bits)
    throw std::invalid_argument("sign_loss: hidden state shorter than signature");
  SignLossResult res;
  res.grad_h0 = Tensor(h0.shape());
  for (std::size_t i = 0; i < bits; ++i) {
    const double s = sig.signs[i];
    const double margin = sig.gamma - h0[i] * s;
    if (margin > 0.0) {
      res.loss += margin;
      res.grad_h0[i] = -s;
    }
  }
  return res;
}

}  // namespace gkrnn
