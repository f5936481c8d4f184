#include "gkrnn/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace gkrnn {

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path,
                        std::size_t offset) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in)
    throw DataError(path + ": truncated header at byte offset " +
                    std::to_string(offset));
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot open " + images_path);
  const std::uint32_t magic = read_be32(img, images_path, 0);
  if (magic != 0x00000803)
    throw DataError(images_path + ": bad IDX image magic at byte offset 0 (got " +
                    std::to_string(magic) + ", want 2051)");
  const std::uint32_t count = read_be32(img, images_path, 4);
  const std::uint32_t rows = read_be32(img, images_path, 8);
  const std::uint32_t cols = read_be32(img, images_path, 12);
  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(count) * rows * cols);
  img.read(reinterpret_cast<char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (static_cast<std::size_t>(img.gcount()) != pixels.size())
    throw DataError(images_path + ": truncated payload, expected " +
                    std::to_string(pixels.size()) + " bytes, got " +
                    std::to_string(img.gcount()));

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("cannot open " + labels_path);
  const std::uint32_t lmagic = read_be32(lab, labels_path, 0);
  if (lmagic != 0x00000801)
    throw DataError(labels_path + ": bad IDX label magic at byte offset 0");
  const std::uint32_t lcount = read_be32(lab, labels_path, 4);
  if (lcount != count)
    throw DataError(labels_path + ": label count " + std::to_string(lcount) +
                    " does not match image count " + std::to_string(count));
  std::vector<std::uint8_t> labels(lcount);
  lab.read(reinterpret_cast<char*>(labels.data()),
           static_cast<std::streamsize>(labels.size()));
  if (static_cast<std::size_t>(lab.gcount()) != labels.size())
    throw DataError(labels_path + ": truncated payload, expected " +
                    std::to_string(labels.size()) + " bytes, got " +
                    std::to_string(lab.gcount()));

  Dataset ds;
  ds.feat_dim = cols;
  std::size_t max_label = 0;
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.rows = Tensor({rows, cols});
    for (std::size_t p = 0; p < static_cast<std::size_t>(rows) * cols; ++p)
      s.rows[p] = pixels[i * rows * cols + p] / 255.0;
    s.label = labels[i];
    max_label = std::max<std::size_t>(max_label, labels[i]);
    ds.samples.push_back(std::move(s));
  }
  ds.classes = max_label + 1;
  return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const std::vector<std::uint8_t>& pixels,
               const std::vector<std::uint8_t>& labels, std::size_t rows,
               std::size_t cols) {
  if (pixels.size() != labels.size() * rows * cols)
    throw DataError("write_idx: pixel/label count mismatch");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw DataError("cannot write " + images_path);
  write_be32(img, 0x00000803);
  write_be32(img, static_cast<std::uint32_t>(labels.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  img.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw DataError("cannot write " + labels_path);
  write_be32(lab, 0x00000801);
  write_be32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

Dataset generate_synthetic_text(Rng& rng, std::size_t size, std::size_t vocab,
                                std::size_t classes, std::size_t len_min,
                                std::size_t len_max) {
  if (vocab < classes + 2)
    throw DataError("generate_synthetic_text: vocab must exceed classes + 1");
  if (len_min < 2 || len_max < len_min)
    throw DataError("generate_synthetic_text: bad length range");
  Dataset ds;
  ds.tokenized = true;
  ds.vocab = vocab;
  ds.classes = classes;
  ds.samples.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    Sample s;
    s.label = static_cast<int>(i % classes);  // balanced by construction
    const std::size_t len =
        len_min + static_cast<std::size_t>(rng.next_below(len_max - len_min + 1));
    s.tokens.resize(len);
    for (auto& t : s.tokens)
      t = static_cast<int>(classes + 1 + rng.next_below(vocab - classes - 1));
    const std::size_t pos = static_cast<std::size_t>(rng.next_below(len));
    s.tokens[pos] = s.label + 1;  // marker token
    ds.samples.push_back(std::move(s));
  }
  rng.shuffle(ds.samples);
  return ds;
}

void generate_synthetic_images(Rng& rng, std::size_t size, std::size_t classes,
                               std::vector<std::uint8_t>& pixels,
                               std::vector<std::uint8_t>& labels) {
  const std::size_t dim = 28;
  pixels.assign(size * dim * dim, 0);
  labels.resize(size);
  for (std::size_t i = 0; i < size; ++i) {
    const auto cls = static_cast<std::size_t>(rng.next_below(classes));
    labels[i] = static_cast<std::uint8_t>(cls);
    std::uint8_t* img = pixels.data() + i * dim * dim;
    // background noise
    for (std::size_t p = 0; p < dim * dim; ++p)
      img[p] = static_cast<std::uint8_t>(rng.next_below(64));
    // bright band: 3 rows whose position encodes the class, with jitter
    const std::size_t band0 = 1 + cls * (dim - 5) / classes +
                              static_cast<std::size_t>(rng.next_below(2));
    for (std::size_t r = band0; r < band0 + 3 && r < dim; ++r)
      for (std::size_t c = 4; c < dim - 4; ++c)
        img[r * dim + c] =
            static_cast<std::uint8_t>(192 + rng.next_below(64));
  }
}

Dataset load_trec_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Dataset ds;
  ds.tokenized = true;
  std::map<std::string, int> label_ids;
  std::map<std::string, int> token_ids;  // 0 reserved for padding
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": missing tab separator");
    const std::string label = line.substr(0, tab);
    Sample s;
    auto [it, inserted] =
        label_ids.emplace(label, static_cast<int>(label_ids.size()));
    s.label = it->second;
    std::istringstream words(line.substr(tab + 1));
    std::string word;
    while (words >> word) {
      std::transform(word.begin(), word.end(), word.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      auto [wit, winserted] =
          token_ids.emplace(word, static_cast<int>(token_ids.size()) + 1);
      s.tokens.push_back(wit->second);
    }
    if (s.tokens.empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": empty text");
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw DataError(path + ": no samples");
  ds.classes = label_ids.size();
  ds.vocab = token_ids.size() + 1;
  ds.class_names.resize(label_ids.size());
  for (const auto& [name, id] : label_ids)
    ds.class_names[static_cast<std::size_t>(id)] = name;
  return ds;
}

SplitIndices split_dataset(const Dataset& ds, double val_frac, double test_frac,
                           Rng& rng) {
  std::vector<std::size_t> idx(ds.samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  const auto n_val = static_cast<std::size_t>(val_frac * idx.size());
  const auto n_test = static_cast<std::size_t>(test_frac * idx.size());
  SplitIndices sp;
  sp.val.assign(idx.begin(), idx.begin() + n_val);
  sp.test.assign(idx.begin() + n_val, idx.begin() + n_val + n_test);
  sp.train.assign(idx.begin() + n_val + n_test, idx.end());
  return sp;
}

Batch make_batch(const Dataset& ds, const std::vector<const Sample*>& samples) {
  if (samples.empty()) throw DataError("make_batch: empty batch");
  Batch b;
  b.batch = samples.size();
  std::size_t max_len = 0;
  for (const auto* s : samples) max_len = std::max(max_len, s->length());
  b.steps = max_len;
  if (ds.tokenized) {
    b.tokens.assign(b.batch * max_len, 0);
    for (std::size_t i = 0; i < b.batch; ++i) {
      const auto& toks = samples[i]->tokens;
      const std::size_t pad = max_len - toks.size();
      for (std::size_t t = 0; t < toks.size(); ++t)
        b.tokens[i * max_len + pad + t] = toks[t];
      b.labels.push_back(samples[i]->label);
    }
  } else {
    b.features = Tensor({b.batch, max_len, ds.feat_dim});
    for (std::size_t i = 0; i < b.batch; ++i) {
      const auto& rows = samples[i]->rows;
      const std::size_t pad = max_len - rows.dim(0);
      for (std::size_t t = 0; t < rows.dim(0); ++t)
        for (std::size_t f = 0; f < ds.feat_dim; ++f)
          b.features[(i * max_len + pad + t) * ds.feat_dim + f] =
              rows.at(t, f);
      b.labels.push_back(samples[i]->label);
    }
  }
  return b;
}

Batch make_batch(const Dataset& ds, const std::vector<std::size_t>& indices) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(indices.size());
  for (std::size_t i : indices) ptrs.push_back(&ds.samples.at(i));
  return make_batch(ds, ptrs);
}

}  // namespace gkrnn
