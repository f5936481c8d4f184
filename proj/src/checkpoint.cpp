#include "gkrnn/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace gkrnn {

namespace {

constexpr char kMagic[8] = {'G', 'K', 'R', 'N', 'N', '\0', '\0', '\1'};

std::vector<unsigned char> to_f32_le(const Tensor& t) {
  std::vector<unsigned char> out(t.numel() * 4);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const float f = static_cast<float>(t[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    out[i * 4 + 0] = static_cast<unsigned char>(bits);
    out[i * 4 + 1] = static_cast<unsigned char>(bits >> 8);
    out[i * 4 + 2] = static_cast<unsigned char>(bits >> 16);
    out[i * 4 + 3] = static_cast<unsigned char>(bits >> 24);
  }
  return out;
}

Tensor from_f32_le(const unsigned char* bytes,
                   const std::vector<std::size_t>& shape) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const std::uint32_t bits = std::uint32_t(bytes[i * 4 + 0]) |
                               (std::uint32_t(bytes[i * 4 + 1]) << 8) |
                               (std::uint32_t(bytes[i * 4 + 2]) << 16) |
                               (std::uint32_t(bytes[i * 4 + 3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    t[i] = static_cast<double>(f);
  }
  return t;
}

nlohmann::ordered_json model_config_json(const ModelConfig& c) {
  return {{"cell", c.cell == CellKind::LSTM ? "lstm" : "gru"},
          {"bidirectional", c.bidirectional},
          {"hidden", c.hidden},
          {"classes", c.classes},
          {"input_dim", c.input_dim},
          {"vocab", c.vocab},
          {"gatekeeper_enabled", c.gatekeeper_enabled}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  const std::string cell = j.at("cell");
  if (cell == "lstm")
    c.cell = CellKind::LSTM;
  else if (cell == "gru")
    c.cell = CellKind::GRU;
  else
    throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                          "unknown cell kind: " + cell);
  c.bidirectional = j.at("bidirectional");
  c.hidden = j.at("hidden");
  c.classes = j.at("classes");
  c.input_dim = j.at("input_dim");
  c.vocab = j.at("vocab");
  c.gatekeeper_enabled = j.at("gatekeeper_enabled");
  return c;
}

}  // namespace

void save_checkpoint(const SequenceModel& model, const Key* key,
                     const Signature* sig, const std::string& path) {
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["config"] = model_config_json(model.config());

  struct Payload {
    std::string name;
    std::vector<unsigned char> bytes;
  };
  std::vector<Payload> payloads;
  auto add_tensor = [&](const std::string& name, const Tensor& t) {
    payloads.push_back({name, to_f32_le(t)});
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = 0;  // fixed up below
    entry["bytes"] = payloads.back().bytes.size();
    entry["crc32"] = static_cast<std::uint32_t>(
        crc32(0L, payloads.back().bytes.data(),
              static_cast<uInt>(payloads.back().bytes.size())));
    manifest["tensors"].push_back(entry);
  };

  for (const auto* p : model.parameters()) add_tensor(p->name, p->value);

  if (key) {
    add_tensor("key.sequences", key->sequences);
    manifest["key"] = {{"method", key_method_name(key->method)},
                       {"seed", key->seed},
                       {"token_ids", key->token_ids}};
  }
  if (sig) {
    manifest["signature"] = {
        {"text", sig->text}, {"gamma", sig->gamma}, {"signs", sig->signs}};
  }

  std::size_t offset = 0;
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    manifest["tensors"][i]["offset"] = offset;
    offset += payloads[i].bytes.size();
  }

  const std::string mjson = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, 8);
  const std::uint64_t mlen = mjson.size();
  unsigned char lenbuf[8];
  for (int i = 0; i < 8; ++i)
    lenbuf[i] = static_cast<unsigned char>(mlen >> (8 * i));
  out.write(reinterpret_cast<const char*>(lenbuf), 8);
  out.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));
  for (const auto& p : payloads)
    out.write(reinterpret_cast<const char*>(p.bytes.data()),
              static_cast<std::streamsize>(p.bytes.size()));
}

Checkpoint load_checkpoint_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError(CheckpointError::Kind::TruncatedPayload,
                          "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 5) != 0)
    throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                          path + ": not a checkpoint container");
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                          path + ": unsupported container version");
  unsigned char lenbuf[8];
  in.read(reinterpret_cast<char*>(lenbuf), 8);
  if (!in)
    throw CheckpointError(CheckpointError::Kind::TruncatedPayload,
                          path + ": truncated manifest length");
  std::uint64_t mlen = 0;
  for (int i = 0; i < 8; ++i) mlen |= std::uint64_t(lenbuf[i]) << (8 * i);
  std::string mjson(mlen, '\0');
  in.read(mjson.data(), static_cast<std::streamsize>(mlen));
  if (static_cast<std::uint64_t>(in.gcount()) != mlen)
    throw CheckpointError(CheckpointError::Kind::TruncatedPayload,
                          path + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mjson);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                          path + ": manifest parse failure: " + e.what());
  }
  std::vector<unsigned char> payload(std::istreambuf_iterator<char>(in), {});

  Checkpoint ck;
  try {
    if (manifest.at("schema_version").get<int>() != 1)
      throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                            path + ": unsupported schema version");
    ck.model_config = model_config_from_json(manifest.at("config"));
    for (const auto& entry : manifest.at("tensors")) {
      const std::string name = entry.at("name");
      const std::vector<std::size_t> shape = entry.at("shape");
      const std::size_t offset = entry.at("offset");
      const std::size_t bytes = entry.at("bytes");
      if (bytes != Tensor::numel_of(shape) * 4)
        throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                              path + ": inconsistent byte count for " + name);
      if (offset + bytes > payload.size())
        throw CheckpointError(
            CheckpointError::Kind::TruncatedPayload,
            path + ": payload for " + name + " extends past end of file (need " +
                std::to_string(offset + bytes) + " bytes, have " +
                std::to_string(payload.size()) + ")");
      const auto crc_expect = entry.at("crc32").get<std::uint32_t>();
      const auto crc_actual = static_cast<std::uint32_t>(
          crc32(0L, payload.data() + offset, static_cast<uInt>(bytes)));
      if (crc_actual != crc_expect)
        throw CheckpointError(CheckpointError::Kind::ChecksumMismatch,
                              path + ": checksum mismatch for " + name);
      ck.tensors.emplace_back(name, from_f32_le(payload.data() + offset, shape));
    }
    if (manifest.contains("key")) {
      Key key;
      key.method = key_method_from_name(manifest["key"].at("method"));
      key.seed = manifest["key"].at("seed");
      key.token_ids =
          manifest["key"].at("token_ids").get<std::vector<std::vector<int>>>();
      bool found = false;
      for (auto& [name, t] : ck.tensors)
        if (name == "key.sequences") {
          key.sequences = t;
          found = true;
        }
      if (!found)
        throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                              path + ": key section without key.sequences");
      ck.key = std::move(key);
    }
    if (manifest.contains("signature")) {
      Signature sig;
      sig.text = manifest["signature"].at("text");
      sig.gamma = manifest["signature"].at("gamma");
      sig.signs = manifest["signature"].at("signs").get<std::vector<int>>();
      ck.signature = std::move(sig);
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                          path + ": manifest field error: " + e.what());
  }
  return ck;
}

LoadedModel load_checkpoint(const std::string& path) {
  Checkpoint ck = load_checkpoint_raw(path);
  LoadedModel lm{SequenceModel(ck.model_config), std::move(ck.key),
                 std::move(ck.signature)};
  for (auto* p : lm.model.parameters()) {
    bool found = false;
    for (auto& [name, t] : ck.tensors)
      if (name == p->name) {
        if (t.shape() != p->value.shape())
          throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                                path + ": tensor shape mismatch for " + name);
        p->value = t;
        found = true;
        break;
      }
    if (!found)
      throw CheckpointError(CheckpointError::Kind::CorruptManifest,
                            path + ": missing tensor " + p->name);
  }
  return lm;
}

}  // namespace gkrnn
