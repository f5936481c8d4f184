#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gkrnn/model.hpp"
#include "gkrnn/rng.hpp"
#include "gkrnn/tensor.hpp"

namespace gkrnn {

struct Sample {
  std::vector<int> tokens;  // tokenized datasets
  Tensor rows;              // [T, d] real-valued datasets
  int label = 0;

  std::size_t length() const {
    return tokens.empty() ? rows.dim(0) : tokens.size();
  }
};

struct Dataset {
  bool tokenized = false;
  std::size_t classes = 0;
  std::size_t vocab = 0;     // tokenized only; id 0 is padding
  std::size_t feat_dim = 0;  // real-valued only
  std::vector<Sample> samples;
  std::vector<std::string> class_names;  // TSV ingestion only
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// IDX image/label pair -> sequences of image rows scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Writes an IDX pair (magic 0x803 / 0x801) from byte images [count, rows*cols].
void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::uint8_t>& pixels,
               const std::vector<std::uint8_t>& labels, std::size_t rows,
               std::size_t cols);

// Random token sequences with one class-determining marker token planted at
// a random position. Token ids 1..C are the markers; 0 is padding.
Dataset generate_synthetic_text(Rng& rng, std::size_t size, std::size_t vocab,
                                std::size_t classes, std::size_t len_min,
                                std::size_t len_max);

// Class-patterned 28x28 gray images (a bright band whose row position
// encodes the class, plus noise), for desk-scale row-sequence experiments.
void generate_synthetic_images(Rng& rng, std::size_t size, std::size_t classes,
                               std::vector<std::uint8_t>& pixels,
                               std::vector<std::uint8_t>& labels);

// TREC-style TSV: label<TAB>text per line, whitespace tokenization.
Dataset load_trec_tsv(const std::string& path);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

SplitIndices split_dataset(const Dataset& ds, double val_frac, double test_frac,
                           Rng& rng);

// Assembles a minibatch; token sequences are left-padded with id 0 to the
// batch maximum length, real-valued ones with zero rows.
Batch make_batch(const Dataset& ds, const std::vector<const Sample*>& samples);
Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices);

}  // namespace gkrnn
