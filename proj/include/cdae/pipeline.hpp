#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cdae/classifier.hpp"
#include "cdae/config.hpp"
#include "cdae/tensor.hpp"

namespace cdae::data {

struct GeneRecord {
  std::string gene_id;
  Tensor image;  // [1,H,W], values in [0,1]
};

/// Portable graymap, plain (P2) or binary (P5), maxval up to 65535 (16-bit
/// samples big-endian). Values are scaled by 1/maxval. DataError on anything
/// malformed or truncated.
Tensor parse_pgm(const std::string& bytes);
Tensor load_image(const std::filesystem::path& path);
/// Binary P5 with the given maxval; values are clamped to [0,1] and rounded.
std::string encode_pgm(const Tensor& image, int maxval = 65535);
void save_image(const Tensor& image, const std::filesystem::path& path, int maxval = 65535);

/// Area-average downsampling: each output pixel is the mean of its (possibly
/// fractional) source footprint. Upsampling throws ConfigError.
Tensor resample(const Tensor& image, std::size_t height, std::size_t width);

struct Normalized {
  Tensor image;
  bool degenerate = false;  // constant input, returned as zeros
};

/// Per-image z-score, then clamp to [-3,3] and scale by 1/3 into [-1,1].
Normalized normalize(const Tensor& image);

/// Resample (when larger than the target) and normalize.
Tensor prepare(const Tensor& image, std::size_t height, std::size_t width, bool* degenerate = nullptr);

/// TSV `gene_id<TAB>image_path`; relative paths resolve against the manifest directory.
std::vector<std::pair<std::string, std::filesystem::path>> load_manifest(
    const std::filesystem::path& manifest);
std::vector<GeneRecord> load_dataset(const std::filesystem::path& manifest);

struct SyntheticSpec {
  std::size_t num_genes = 400;
  std::size_t height = 96;
  std::size_t width = 48;
  std::size_t num_categories = 6;
  std::size_t min_positives = 30;
  std::size_t max_positives = 60;
  /// Explicit positives per category; drawn from [min_positives, max_positives] when empty.
  std::vector<std::size_t> category_sizes;
  double pattern_amplitude = 0.35;
  /// Std-dev of independent per-pixel Gaussian noise.
  double noise = 0.03;
  /// Amplitude of a smooth random per-gene blob unrelated to any category.
  double clutter = 0.0;
  std::uint64_t seed = 7;

  static SyntheticSpec from(const KeyValues& kv);
  static SyntheticSpec from(const KeyValues& kv, SyntheticSpec base);
};

struct SyntheticDataset {
  std::vector<GeneRecord> records;
  go::AnnotationTable annotations;
  std::vector<std::size_t> category_sizes;
};

/// Shared tissue-like base texture, plus an additive spatial pattern (band or
/// blob) for every category a gene belongs to, plus optional clutter and
/// pixel noise; clamped to [0,1]. Deterministic from spec.seed.
SyntheticDataset synthesize(const SyntheticSpec& spec);

/// Writes `<dir>/images/<gene>.pgm`, `<dir>/manifest.tsv` and `<dir>/annotations.tsv`.
void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir);

}  // namespace cdae::data

namespace cdae::data {

/// Gene id -> representation vector. Text form: a header line
/// `count<TAB>dim`, then one `gene_id<TAB>v1<TAB>...<TAB>vdim` line per gene,
/// values written in shortest round-trip decimal.
struct RepresentationSet {
  std::vector<std::string> gene_ids;
  go::Matrix features;

  std::string to_text() const;
  static RepresentationSet parse(const std::string& text);
  static RepresentationSet load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace cdae::data
