#pragma once

#include <optional>
#include <string>

#include "gkrnn/keysig.hpp"
#include "gkrnn/model.hpp"

namespace gkrnn {

// Container layout: 8-byte magic "GKRNN\0\0\1", u64 little-endian manifest
// length, UTF-8 JSON manifest (model config, tensor directory with
// name/shape/offset/crc32, reserved "key" and "signature" sections), then
// raw little-endian float32 payloads in manifest order.

struct CheckpointError : std::runtime_error {
  enum class Kind {
    VersionMismatch,
    CorruptManifest,
    TruncatedPayload,
    ChecksumMismatch
  };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
};

struct Checkpoint {
  ModelConfig model_config;
  std::vector<std::pair<std::string, Tensor>> tensors;  // manifest order
  std::optional<Key> key;
  std::optional<Signature> signature;
};

void save_checkpoint(const SequenceModel& model, const Key* key,
                     const Signature* sig, const std::string& path);

Checkpoint load_checkpoint_raw(const std::string& path);

struct LoadedModel {
  SequenceModel model;
  std::optional<Key> key;
  std::optional<Signature> signature;
};

LoadedModel load_checkpoint(const std::string& path);

}  // namespace gkrnn
