#include "cdae/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cdae/errors.hpp"
#include "cdae/io.hpp"

namespace cdae::data {

namespace {

class PgmScanner {
 public:
  PgmScanner(const std::string& bytes, std::size_t pos) : b_(bytes), pos_(pos) {}

  // Decimal integer, skipping whitespace and '#' comments first.
  long integer(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) ++pos_;
    if (start == pos_) throw DataError(std::string("PGM: missing or malformed ") + what);
    if (pos_ - start > 9) throw DataError(std::string("PGM: ") + what + " out of range");
    return std::stol(b_.substr(start, pos_ - start));
  }

  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  // Exactly one whitespace byte separates the header from binary samples.
  void single_space() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw DataError("PGM: malformed header");
    }
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  const std::string& b_;
  std::size_t pos_;
};

}  // namespace

Tensor parse_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw DataError("unsupported image format (expected PGM P2 or P5)");
  }
  const bool binary = bytes[1] == '5';
  PgmScanner s(bytes, 2);
  const long width = s.integer("width");
  const long height = s.integer("height");
  const long maxval = s.integer("maxval");
  if (width <= 0 || height <= 0) throw DataError("PGM: image dimensions must be positive");
  if (maxval <= 0 || maxval > 65535) throw DataError("PGM: maxval must be in [1,65535]");

  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> values(n);
  const double inv = 1.0 / static_cast<double>(maxval);
  if (binary) {
    s.single_space();
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    if (s.remaining() < n * bytes_per) throw DataError("PGM: truncated pixel data");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + s.pos());
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = bytes_per == 1 ? p[i] : (unsigned{p[2 * i]} << 8) | p[2 * i + 1];
      if (v > static_cast<unsigned>(maxval)) throw DataError("PGM: sample exceeds maxval");
      values[i] = static_cast<double>(v) * inv;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      long v = 0;
      try {
        v = s.integer("sample");
      } catch (const DataError&) {
        throw DataError("PGM: truncated pixel data");
      }
      if (v > maxval) throw DataError("PGM: sample exceeds maxval");
      values[i] = static_cast<double>(v) * inv;
    }
  }
  return Tensor::from({1, static_cast<std::size_t>(height), static_cast<std::size_t>(width)},
                      std::move(values));
}

Tensor load_image(const std::filesystem::path& path) {
  try {
    return parse_pgm(io::read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string encode_pgm(const Tensor& image, int maxval) {
  if (image.rank() != 3 || image.extent(0) != 1) throw ShapeError("encode_pgm: expected [1,H,W]");
  if (maxval <= 0 || maxval > 65535) throw ConfigError("encode_pgm: maxval must be in [1,65535]");
  std::string out = "P5\n" + std::to_string(image.extent(2)) + " " + std::to_string(image.extent(1)) +
                    "\n" + std::to_string(maxval) + "\n";
  const bool wide = maxval > 255;
  for (double v : image.values()) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (wide) out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xff));
  }
  return out;
}

void save_image(const Tensor& image, const std::filesystem::path& path, int maxval) {
  io::write_file_atomic(path, encode_pgm(image, maxval));
}

namespace {

// Overlap of output cell i with each source cell, in units where a source cell
// is `target` wide and an output cell is `source` wide. All integers, exact.
struct Footprint {
  std::size_t first;
  std::vector<double> weights;  // overlap / source, sums to 1
};

std::vector<Footprint> footprints(std::size_t source, std::size_t target) {
  std::vector<Footprint> out(target);
  for (std::size_t i = 0; i < target; ++i) {
    const std::size_t lo = i * source, hi = (i + 1) * source;
    const std::size_t r0 = lo / target, r1 = (hi + target - 1) / target;
    out[i].first = r0;
    for (std::size_t r = r0; r < r1; ++r) {
      const std::size_t a = std::max(lo, r * target), b = std::min(hi, (r + 1) * target);
      out[i].weights.push_back(static_cast<double>(b - a) / static_cast<double>(source));
    }
  }
  return out;
}

}  // namespace

Tensor resample(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw ShapeError("resample: expected [C,H,W], got " + to_string(image.shape()));
  const std::size_t C = image.extent(0), H = image.extent(1), W = image.extent(2);
  if (height == 0 || width == 0) throw ConfigError("resample: target dimensions must be positive");
  if (height > H || width > W) {
    throw ConfigError("resample: upsampling " + std::to_string(H) + "x" + std::to_string(W) + " to " +
                      std::to_string(height) + "x" + std::to_string(width) + " is not supported");
  }
  if (height == H && width == W) return image;

  const auto fy = footprints(H, height), fx = footprints(W, width);
  Tensor cols = Tensor::zeros({C, H, width});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t j = 0; j < width; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < fx[j].weights.size(); ++t)
          acc += fx[j].weights[t] * image[(c * H + y) * W + fx[j].first + t];
        cols[(c * H + y) * width + j] = acc;
      }
  Tensor out = Tensor::zeros({C, height, width});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < fy[i].weights.size(); ++t)
          acc += fy[i].weights[t] * cols[(c * H + fy[i].first + t) * width + j];
        out[(c * height + i) * width + j] = std::clamp(acc, 0.0, 1.0);
      }
  return out;
}

Normalized normalize(const Tensor& image) {
  const double m = mean(image);
  const double sd = stddev(image);
  if (!(sd > 1e-12)) return {Tensor::zeros(image.shape()), true};
  Tensor out = image;
  for (auto& v : out.values()) v = std::clamp((v - m) / sd, -3.0, 3.0) / 3.0;
  return {std::move(out), false};
}

Tensor prepare(const Tensor& image, std::size_t height, std::size_t width, bool* degenerate) {
  auto n = normalize(resample(image, height, width));
  if (degenerate) *degenerate = n.degenerate;
  return std::move(n.image);
}

std::vector<std::pair<std::string, std::filesystem::path>> load_manifest(
    const std::filesystem::path& manifest) {
  const std::string text = io::read_file(manifest);
  const auto base = manifest.parent_path();
  std::vector<std::pair<std::string, std::filesystem::path>> entries;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& raw : io::split_lines(text)) {
    ++line_no;
    const std::string line = io::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto cols = io::split(raw, '\t');
    if (cols.size() != 2) {
      throw DataError(manifest.string() + ":" + std::to_string(line_no) +
                      ": expected gene_id<TAB>image_path");
    }
    std::string gene = io::trim(cols[0]);
    if (!seen.insert(gene).second) {
      throw DataError(manifest.string() + ": duplicate gene id " + gene);
    }
    std::filesystem::path p = io::trim(cols[1]);
    if (p.is_relative()) p = base / p;
    entries.emplace_back(std::move(gene), std::move(p));
  }
  if (entries.empty()) throw DataError(manifest.string() + ": manifest lists no images");
  return entries;
}

std::vector<GeneRecord> load_dataset(const std::filesystem::path& manifest) {
  std::vector<GeneRecord> records;
  for (auto& [gene, path] : load_manifest(manifest)) records.push_back({gene, load_image(path)});
  return records;
}

SyntheticSpec SyntheticSpec::from(const KeyValues& kv) { return from(kv, SyntheticSpec{}); }

SyntheticSpec SyntheticSpec::from(const KeyValues& kv, SyntheticSpec s) {
  s.num_genes = kv.get_size("num_genes", s.num_genes);
  s.height = kv.get_size("height", s.height);
  s.width = kv.get_size("width", s.width);
  s.num_categories = kv.get_size("num_categories", s.num_categories);
  s.min_positives = kv.get_size("min_positives", s.min_positives);
  s.max_positives = kv.get_size("max_positives", s.max_positives);
  if (auto sizes = kv.get("category_sizes")) {
    s.category_sizes.clear();
    for (const auto& part : io::split(*sizes, ',')) {
      const std::string item = io::trim(part);
      std::size_t n = 0;
      const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
      if (ec != std::errc() || end != item.data() + item.size() || item.empty()) {
        throw ConfigError("config key 'category_sizes': cannot parse '" + item + "'");
      }
      s.category_sizes.push_back(n);
    }
  }
  s.pattern_amplitude = kv.get_double("pattern_amplitude", s.pattern_amplitude);
  s.noise = kv.get_double("noise", s.noise);
  s.clutter = kv.get_double("clutter", s.clutter);
  s.seed = kv.get_u64("seed", s.seed);
  return s;
}

namespace {

constexpr std::size_t kMinPositives = 5;

std::vector<std::size_t> resolve_sizes(const SyntheticSpec& spec, Rng& rng) {
  if (spec.num_genes == 0 || spec.height == 0 || spec.width == 0) {
    throw ConfigError("synthetic spec: genes and image dimensions must be positive");
  }
  std::vector<std::size_t> sizes = spec.category_sizes;
  if (sizes.empty()) {
    if (spec.min_positives > spec.max_positives) {
      throw ConfigError("synthetic spec: min_positives exceeds max_positives");
    }
    for (std::size_t c = 0; c < spec.num_categories; ++c) {
      sizes.push_back(spec.min_positives + rng.below(spec.max_positives - spec.min_positives + 1));
    }
  } else if (sizes.size() != spec.num_categories) {
    throw ConfigError("synthetic spec: category_sizes must list num_categories entries");
  }
  for (auto n : sizes) {
    // Every category also needs at least kMinPositives negatives for balanced folds.
    if (n < kMinPositives || n + kMinPositives > spec.num_genes) {
      throw ConfigError("synthetic spec: infeasible category size " + std::to_string(n) + " for " +
                        std::to_string(spec.num_genes) + " genes");
    }
  }
  return sizes;
}

// Soft-edged ellipse standing in for a brain section, with a smooth cortical-like gradient.
Tensor base_texture(std::size_t H, std::size_t W, Rng& rng) {
  Tensor t = Tensor::zeros({1, H, W});
  const double cy = 0.5 + rng.uniform(-0.03, 0.03), cx = 0.5 + rng.uniform(-0.03, 0.03);
  const double ry = 0.42, rx = 0.40;
  const double fy = rng.uniform(1.0, 2.0), fx = rng.uniform(1.0, 2.0), phase = rng.uniform(0.0, 6.28);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double u = (static_cast<double>(y) + 0.5) / static_cast<double>(H);
      const double v = (static_cast<double>(x) + 0.5) / static_cast<double>(W);
      const double r = std::hypot((u - cy) / ry, (v - cx) / rx);
      const double inside = 1.0 / (1.0 + std::exp((r - 1.0) * 12.0));
      const double shade = 0.22 + 0.06 * std::sin(fy * 3.14159 * u + phase) * std::cos(fx * 3.14159 * v);
      t[y * W + x] = inside * shade;
    }
  return t;
}

Tensor category_pattern(std::size_t H, std::size_t W, double amplitude, Rng& rng) {
  Tensor p = Tensor::zeros({1, H, W});
  const bool band = rng.uniform() < 0.5;
  const double strength = amplitude * rng.uniform(0.8, 1.0);
  const double cy = rng.uniform(0.2, 0.8), cx = rng.uniform(0.25, 0.75);
  const double sy = rng.uniform(0.04, 0.08), sx = rng.uniform(0.06, 0.12);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double u = (static_cast<double>(y) + 0.5) / static_cast<double>(H);
      const double v = (static_cast<double>(x) + 0.5) / static_cast<double>(W);
      double e = 0.0;
      if (band) {
        // Horizontal stripe spanning the section's width.
        const double across = std::abs(v - 0.5) < 0.38 ? 1.0 : 0.0;
        e = across * std::exp(-0.5 * ((u - cy) / sy) * ((u - cy) / sy));
      } else {
        e = std::exp(-0.5 * (((u - cy) / sy) * ((u - cy) / sy) + ((v - cx) / sx) * ((v - cx) / sx)));
      }
      p[y * W + x] = strength * e;
    }
  return p;
}

}  // namespace

SyntheticDataset synthesize(const SyntheticSpec& spec) {
  const Rng root(spec.seed);
  Rng size_rng = root.derive("sizes");
  SyntheticDataset ds;
  ds.category_sizes = resolve_sizes(spec, size_rng);
  const std::size_t H = spec.height, W = spec.width, G = spec.num_genes;

  Rng base_rng = root.derive("base");
  const Tensor base = base_texture(H, W, base_rng);

  std::vector<Tensor> patterns;
  std::vector<std::vector<std::size_t>> members_of_gene(G);
  for (std::size_t c = 0; c < ds.category_sizes.size(); ++c) {
    Rng crng = root.derive("category").derive(c);
    patterns.push_back(category_pattern(H, W, spec.pattern_amplitude, crng));
    std::vector<std::size_t> genes(G);
    std::iota(genes.begin(), genes.end(), std::size_t{0});
    for (std::size_t i = 0; i < ds.category_sizes[c]; ++i) {
      std::swap(genes[i], genes[i + crng.below(G - i)]);
      members_of_gene[genes[i]].push_back(c);
    }
  }

  auto gene_name = [](std::size_t g) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "gene%05zu", g);
    return std::string(buf);
  };
  auto category_name = [](std::size_t c) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "GO:99%05zu", c + 1);
    return std::string(buf);
  };

  for (std::size_t g = 0; g < G; ++g) {
    Tensor img = base;
    for (auto c : members_of_gene[g]) axpy(1.0, patterns[c], img);
    Rng grng = root.derive("gene").derive(g);
    if (spec.clutter > 0.0) axpy(1.0, category_pattern(H, W, spec.clutter, grng), img);
    if (spec.noise > 0.0) {
      for (auto& v : img.values()) v += spec.noise * grng.normal();
    }
    for (auto& v : img.values()) v = std::clamp(v, 0.0, 1.0);
    ds.records.push_back({gene_name(g), std::move(img)});
    for (auto c : members_of_gene[g]) ds.annotations.categories[category_name(c)].push_back(gene_name(g));
  }
  return ds;
}

void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& dir) {
  std::string manifest = "# gene_id\timage_path\n";
  for (const auto& r : dataset.records) {
    const std::filesystem::path rel = std::filesystem::path("images") / (r.gene_id + ".pgm");
    save_image(r.image, dir / rel);
    manifest += r.gene_id + "\t" + rel.generic_string() + "\n";
  }
  io::write_file_atomic(dir / "manifest.tsv", manifest);
  io::write_file_atomic(dir / "annotations.tsv", dataset.annotations.to_tsv());
}

}  // namespace cdae::data

namespace cdae::data {

std::string RepresentationSet::to_text() const {
  std::string out = std::to_string(gene_ids.size()) + "\t" + std::to_string(features.cols()) + "\n";
  for (std::size_t i = 0; i < gene_ids.size(); ++i) {
    out += gene_ids[i];
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      out += '\t';
      out += io::format_double(features(static_cast<Eigen::Index>(i), j));
    }
    out += '\n';
  }
  return out;
}

RepresentationSet RepresentationSet::parse(const std::string& text) {
  auto lines = io::split_lines(text);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw DataError("representation file is empty");
  const auto header = io::split(lines[0], '\t');
  std::size_t count = 0, dim = 0;
  try {
    if (header.size() != 2) throw std::invalid_argument("header");
    count = std::stoul(header[0]);
    dim = std::stoul(header[1]);
  } catch (const std::exception&) {
    throw DataError("representation file: header must be count<TAB>dim");
  }
  if (lines.size() != count + 1) {
    throw DataError("representation file: header announces " + std::to_string(count) + " rows, found " +
                    std::to_string(lines.size() - 1));
  }
  RepresentationSet set;
  set.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < count; ++i) {
    const auto cols = io::split(lines[i + 1], '\t');
    if (cols.size() != dim + 1) {
      throw DataError("representation file: row " + std::to_string(i + 1) + " has " +
                      std::to_string(cols.size() - 1) + " values, expected " + std::to_string(dim));
    }
    set.gene_ids.push_back(cols[0]);
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      const auto& s = cols[j + 1];
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        throw DataError("representation file: bad value '" + s + "' in row " + std::to_string(i + 1));
      }
      set.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return set;
}

RepresentationSet RepresentationSet::load(const std::filesystem::path& path) {
  return parse(io::read_file(path));
}

void RepresentationSet::save(const std::filesystem::path& path) const {
  io::write_file_atomic(path, to_text());
}

}  // namespace cdae::data
