#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "afgn/errors.hpp"
#include "afgn/image.hpp"
#include "afgn/rng.hpp"

namespace afgn {

enum class SourceTag { real, fp_high, fp_low, fp_non, external_fake };

inline std::string to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::real: return "real";
    case SourceTag::fp_high: return "fp-high";
    case SourceTag::fp_low: return "fp-low";
    case SourceTag::fp_non: return "fp-non";
    case SourceTag::external_fake: return "external-fake";
  }
  return "?";
}

inline bool is_fingerprint_tag(SourceTag tag) {
  return tag == SourceTag::fp_high || tag == SourceTag::fp_low ||
         tag == SourceTag::fp_non;
}

struct ImageRecord {
  std::string id;
  Image image;
  SourceTag tag = SourceTag::real;
  std::string source_id;  // originating real image for fp-* records
  std::string path;       // on-disk origin, when loaded from a file
};

// Reconstruction outputs are written as "<tag>__<source>.ppm" so provenance
// survives a round trip through the filesystem.
inline std::string fingerprint_file_stem(SourceTag tag,
                                         const std::string& source_id) {
  return to_string(tag) + "__" + source_id;
}

inline bool parse_fingerprint_stem(const std::string& stem, SourceTag& tag,
                                   std::string& source_id) {
  for (SourceTag t : {SourceTag::fp_high, SourceTag::fp_low, SourceTag::fp_non,
                      SourceTag::external_fake}) {
    std::string prefix = to_string(t) + "__";
    if (stem.rfind(prefix, 0) == 0) {
      tag = t;
      source_id = stem.substr(prefix.size());
      return true;
    }
  }
  return false;
}

// Loads every .ppm/.png under dir (sorted by filename for determinism).
// Stems carrying a provenance prefix keep their tag; anything else gets
// `fallback`.
inline std::vector<ImageRecord> load_image_dir(const std::string& dir,
                                               SourceTag fallback) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir + ": not a directory");
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".png") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw IoError(dir + ": no .ppm or .png images found");
  std::vector<ImageRecord> records;
  records.reserve(paths.size());
  for (const auto& p : paths) {
    ImageRecord rec;
    rec.image = load_image(p.string());
    std::string stem = p.stem().string();
    SourceTag tag;
    std::string source;
    if (parse_fingerprint_stem(stem, tag, source)) {
      rec.tag = tag;
      rec.source_id = source;
    } else {
      rec.tag = fallback;
    }
    rec.id = stem;
    rec.path = p.string();
    records.push_back(std::move(rec));
  }
  return records;
}

struct DatasetSplit {
  std::vector<ImageRecord> train, val, test;
};

// Seed-deterministic disjoint, exhaustive partition.
inline DatasetSplit split_dataset(std::vector<ImageRecord> records,
                                  double train_frac, double val_frac,
                                  double test_frac, uint64_t seed) {
  double total = train_frac + val_frac + test_frac;
  if (train_frac < 0 || val_frac < 0 || test_frac < 0 ||
      std::abs(total - 1.0) > 1e-9)
    throw ValueError("split_dataset: fractions must be nonnegative and sum "
                     "to 1, got " +
                     std::to_string(total));
  std::vector<size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(seed).child(0x5117);
  rng.shuffle(order);
  size_t n = records.size();
  size_t n_train = static_cast<size_t>(std::floor(train_frac * n));
  size_t n_val = static_cast<size_t>(std::floor(val_frac * n));
  if (n_train + n_val > n) n_val = n - n_train;
  DatasetSplit split;
  for (size_t i = 0; i < n; ++i) {
    ImageRecord& rec = records[order[i]];
    if (i < n_train)
      split.train.push_back(std::move(rec));
    else if (i < n_train + n_val)
      split.val.push_back(std::move(rec));
    else
      split.test.push_back(std::move(rec));
  }
  return split;
}

}  // namespace afgn
