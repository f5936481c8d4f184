#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <map>

#include "doctest.h"
#include "gkrnn/dataset.hpp"
#include "gkrnn/train.hpp"

using namespace gkrnn;
namespace fs = std::filesystem;

namespace {
struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gkrnn_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};
}  // namespace

TEST_CASE("idx round trip") {
  TempDir tmp;
  Rng rng(7);
  std::vector<std::uint8_t> pixels, labels;
  generate_synthetic_images(rng, 20, 4, pixels, labels);
  REQUIRE(pixels.size() == 20 * 28 * 28);
  REQUIRE(labels.size() == 20);
  write_idx(tmp.file("img.idx"), tmp.file("lbl.idx"), pixels, labels, 28, 28);

  Dataset ds = load_idx(tmp.file("img.idx"), tmp.file("lbl.idx"));
  CHECK(ds.samples.size() == 20);
  CHECK(ds.feat_dim == 28);
  CHECK(ds.classes == 4);
  CHECK_FALSE(ds.tokenized);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(ds.samples[i].label == labels[i]);
    CHECK(ds.samples[i].rows.dim(0) == 28);
    for (std::size_t p = 0; p < 28 * 28; ++p) {
      const double expect = pixels[i * 28 * 28 + p] / 255.0;
      CHECK(ds.samples[i].rows[p] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("idx pixel scaling endpoints") {
  TempDir tmp;
  std::vector<std::uint8_t> pixels(2 * 2, 0);
  pixels[1] = 255;
  pixels[2] = 128;
  std::vector<std::uint8_t> labels = {1};
  write_idx(tmp.file("img.idx"), tmp.file("lbl.idx"), pixels, labels, 2, 2);
  Dataset ds = load_idx(tmp.file("img.idx"), tmp.file("lbl.idx"));
  CHECK(ds.samples[0].rows[0] == 0.0);
  CHECK(ds.samples[0].rows[1] == 1.0);
  CHECK(ds.samples[0].rows[2] == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("idx error reporting") {
  TempDir tmp;
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_idx(tmp.file("nope.idx"), tmp.file("nope2.idx")), DataError);
  }
  SUBCASE("bad magic") {
    std::ofstream f(tmp.file("bad.idx"), std::ios::binary);
    f.write("\x00\x00\x08\x05", 4);
    f.close();
    std::vector<std::uint8_t> pixels(4, 0), labels = {0};
    write_idx(tmp.file("img.idx"), tmp.file("lbl.idx"), pixels, labels, 2, 2);
    CHECK_THROWS_AS(load_idx(tmp.file("bad.idx"), tmp.file("lbl.idx")), DataError);
  }
  SUBCASE("truncated payload names byte counts") {
    std::vector<std::uint8_t> pixels(3 * 4, 9), labels = {0, 1, 2};
    write_idx(tmp.file("img.idx"), tmp.file("lbl.idx"), pixels, labels, 2, 2);
    // chop the image file short
    const auto full = fs::file_size(tmp.file("img.idx"));
    fs::resize_file(tmp.file("img.idx"), full - 5);
    try {
      load_idx(tmp.file("img.idx"), tmp.file("lbl.idx"));
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("12") != std::string::npos);  // expected payload bytes
      CHECK(msg.find("7") != std::string::npos);   // actual payload bytes
    }
  }
  SUBCASE("count mismatch between images and labels") {
    std::vector<std::uint8_t> pixels(2 * 4, 1), labels = {0, 1};
    write_idx(tmp.file("img.idx"), tmp.file("lbl.idx"), pixels, labels, 2, 2);
    std::vector<std::uint8_t> labels3 = {0, 1, 2};
    write_idx(tmp.file("img3.idx"), tmp.file("lbl3.idx"),
              std::vector<std::uint8_t>(3 * 4, 1), labels3, 2, 2);
    CHECK_THROWS_AS(load_idx(tmp.file("img.idx"), tmp.file("lbl3.idx")), DataError);
  }
}

TEST_CASE("synthetic text") {
  Rng rng(42);
  Dataset ds = generate_synthetic_text(rng, 600, 50, 6, 8, 16);
  CHECK(ds.tokenized);
  CHECK(ds.classes == 6);
  CHECK(ds.vocab == 50);
  CHECK(ds.samples.size() == 600);

  std::map<int, int> counts;
  for (const auto& s : ds.samples) {
    CHECK(s.tokens.size() >= 8);
    CHECK(s.tokens.size() <= 16);
    // exactly one marker token, matching the label
    int markers = 0;
    for (int t : s.tokens) {
      CHECK(t >= 1);
      CHECK(t < 50);
      if (t <= 6) {
        ++markers;
        CHECK(t == s.label + 1);
      }
    }
    CHECK(markers == 1);
    counts[s.label]++;
  }
  // balanced to exactly size/classes
  for (int c = 0; c < 6; ++c) CHECK(counts[c] == 100);

  // deterministic under the same seed
  Rng rng2(42);
  Dataset ds2 = generate_synthetic_text(rng2, 600, 50, 6, 8, 16);
  for (std::size_t i = 0; i < 600; ++i) {
    CHECK(ds.samples[i].tokens == ds2.samples[i].tokens);
    CHECK(ds.samples[i].label == ds2.samples[i].label);
  }
}

TEST_CASE("synthetic images encode class in band position") {
  Rng rng(3);
  std::vector<std::uint8_t> pixels, labels;
  generate_synthetic_images(rng, 40, 4, pixels, labels);
  for (std::size_t i = 0; i < 40; ++i) {
    // the class band rows should be brighter on average than the rest
    double band = 0.0, rest = 0.0;
    const std::size_t base = 1 + labels[i] * (28 - 5) / 4;  // jitter adds 0..1
    std::size_t band_n = 0, rest_n = 0;
    for (std::size_t r = 0; r < 28; ++r) {
      for (std::size_t c = 0; c < 28; ++c) {
        const double v = pixels[i * 784 + r * 28 + c];
        if (r >= base && r < base + 4) { band += v; ++band_n; }
        else { rest += v; ++rest_n; }
      }
    }
    CHECK(band / band_n > rest / rest_n + 50.0);
  }
}

TEST_CASE("trec tsv ingestion") {
  TempDir tmp;
  {
    std::ofstream f(tmp.file("data.tsv"));
    f << "LOC\tWhere is Rome ?\n";
    f << "NUM\tHow many moons does Mars have ?\n";
    f << "LOC\twhere IS rome ?\n";
    f << "\n";  // blank line skipped
  }
  Dataset ds = load_trec_tsv(tmp.file("data.tsv"));
  CHECK(ds.tokenized);
  CHECK(ds.classes == 2);
  CHECK(ds.samples.size() == 3);
  CHECK(ds.class_names == std::vector<std::string>{"LOC", "NUM"});
  CHECK(ds.samples[0].label == ds.samples[2].label);
  // case-insensitive tokens share vocabulary ids
  CHECK(ds.samples[0].tokens[2] == ds.samples[2].tokens[2]);  // "rome"
  CHECK(ds.samples[0].tokens[0] == ds.samples[2].tokens[0]);  // "where"
  // ids start at 1; 0 reserved for padding
  for (const auto& s : ds.samples)
    for (int t : s.tokens) CHECK(t >= 1);

  SUBCASE("malformed line raises DataError") {
    std::ofstream f(tmp.file("bad.tsv"));
    f << "NOTABSEPARATED\n";
    f.close();
    CHECK_THROWS_AS(load_trec_tsv(tmp.file("bad.tsv")), DataError);
  }
}

TEST_CASE("split is a disjoint partition") {
  Rng rng(11);
  Dataset ds = generate_synthetic_text(rng, 100, 30, 5, 4, 8);
  SplitIndices sp = split_dataset(ds, 0.2, 0.1, rng);
  CHECK(sp.val.size() == 20);
  CHECK(sp.test.size() == 10);
  CHECK(sp.train.size() == 70);
  std::vector<bool> seen(100, false);
  for (auto idx_list : {&sp.train, &sp.val, &sp.test})
    for (std::size_t i : *idx_list) {
      CHECK_FALSE(seen[i]);
      seen[i] = true;
    }
  for (bool b : seen) CHECK(b);
}

TEST_CASE("batch left padding") {
  Rng rng(13);
  Dataset ds = generate_synthetic_text(rng, 10, 30, 5, 4, 9);
  std::vector<std::size_t> idx = {0, 1, 2, 3};
  Batch b = make_batch(ds, idx);
  std::size_t max_len = 0;
  for (std::size_t i : idx) max_len = std::max(max_len, ds.samples[i].length());
  CHECK(b.steps == max_len);
  CHECK(b.batch == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& toks = ds.samples[idx[i]].tokens;
    const std::size_t pad = max_len - toks.size();
    for (std::size_t t = 0; t < pad; ++t) CHECK(b.tokens[i * max_len + t] == 0);
    for (std::size_t t = 0; t < toks.size(); ++t)
      CHECK(b.tokens[i * max_len + pad + t] == toks[t]);
    CHECK(b.labels[i] == ds.samples[idx[i]].label);
  }
}

TEST_CASE("trigger set") {
  Rng rng(21);
  Dataset ds = generate_synthetic_text(rng, 500, 30, 5, 4, 8);
  TriggerSet trig = build_trigger_set(ds, 50, rng);
  CHECK(trig.size() == 50);
  CHECK(ds.samples.size() == 450);  // drawn samples leave the training pool
  std::map<int, int> assigned_counts;
  for (std::size_t i = 0; i < trig.size(); ++i) {
    CHECK(trig.assigned_labels[i] != trig.original_labels[i]);
    CHECK(trig.inputs[i].label == trig.assigned_labels[i]);
    CHECK(trig.assigned_labels[i] >= 0);
    CHECK(trig.assigned_labels[i] < 5);
    // original label is recoverable from the marker token
    int marker = 0;
    for (int t : trig.inputs[i].tokens)
      if (t <= 5) marker = t;
    CHECK(marker - 1 == trig.original_labels[i]);
    assigned_counts[trig.assigned_labels[i]]++;
  }
  // roughly uniform over wrong labels; generous bound for 50 draws / 5 classes
  for (auto& [c, n] : assigned_counts) CHECK(n < 30);

  Dataset as_ds = trig.as_dataset(ds);
  CHECK(as_ds.samples.size() == 50);
  CHECK(as_ds.classes == 5);
  CHECK(as_ds.tokenized);
  CHECK(as_ds.samples[0].label == trig.assigned_labels[0]);
  CHECK(as_ds.samples[0].tokens == trig.inputs[0].tokens);

  SUBCASE("deterministic given rng state") {
    Rng ra(77), rb(77);
    Dataset d2 = generate_synthetic_text(ra, 200, 30, 5, 4, 8);
    Dataset d3 = generate_synthetic_text(rb, 200, 30, 5, 4, 8);
    TriggerSet t2 = build_trigger_set(d2, 20, ra);
    TriggerSet t3 = build_trigger_set(d3, 20, rb);
    CHECK(t2.assigned_labels == t3.assigned_labels);
    CHECK(t2.original_labels == t3.original_labels);
    for (std::size_t i = 0; i < 20; ++i)
      CHECK(t2.inputs[i].tokens == t3.inputs[i].tokens);
  }
  SUBCASE("too large trigger set rejected") {
    CHECK_THROWS(build_trigger_set(ds, ds.samples.size() + 1, rng));
  }
}
