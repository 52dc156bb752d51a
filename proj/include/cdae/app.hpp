#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cdae/classifier.hpp"
#include "cdae/config.hpp"
#include "cdae/metrics.hpp"
#include "cdae/network.hpp"
#include "cdae/pipeline.hpp"

// Command implementations behind the `cdae` executable. Each throws a
// cdae::Error subclass on failure; the executable maps those to exit codes.
namespace cdae::app {

namespace fs = std::filesystem;

/// Loads a manifest and prepares every image for `config` (resample + normalize).
std::vector<data::GeneRecord> load_prepared(const fs::path& manifest, const CdaeConfig& config,
                                            std::ostream& log);

data::RepresentationSet encode_records(const Network& network,
                                       const std::vector<data::GeneRecord>& prepared);

struct TrainCdaeArgs {
  CdaeConfig config;
  fs::path manifest;
  fs::path checkpoint;
  /// Defaults to `<checkpoint>.loss.csv`.
  std::optional<fs::path> loss_csv;
};

std::string loss_history_csv(const LossHistory& history);

/// Trains on the manifest, writes the checkpoint and the per-epoch loss CSV.
LossHistory train_cdae(const TrainCdaeArgs& args, std::ostream& log);

void encode(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out,
            std::ostream& log);

struct ClassifyArgs {
  fs::path representations;
  fs::path annotations;
  fs::path report;
  std::uint64_t seed = 42;
  std::optional<double> baseline_auc;
  std::size_t min_positives = 15;
  std::size_t max_positives = 500;
  go::CvOptions cv;
};

/// Unknown gene ids are skipped with a warning; DataError when no annotated
/// gene has a representation, MetricError when no category survives the size
/// filter. The report file is only written on success.
metrics::AucReport classify(const ClassifyArgs& args, std::ostream& log);

/// Console summary: category count and mean AUC, plus the baseline and error
/// reduction when a baseline is set. MetricError when no category was evaluated.
std::string classify_summary(const metrics::AucReport& report);

enum class SweepParameter { kDenoisingRate, kKernelSize, kRepresentationSize };

struct SweepSpec {
  SweepParameter parameter = SweepParameter::kDenoisingRate;
  std::vector<double> values;
  CdaeConfig base;
  fs::path manifest;
  fs::path annotations;
  std::size_t min_positives = 15;
  std::size_t max_positives = 500;
  go::CvOptions cv;

  /// Keys: parameter, values, manifest, annotations, min_positives,
  /// max_positives, lambda_grid, plus every CdaeConfig key. Relative paths
  /// resolve against `base_dir`.
  static SweepSpec from(const KeyValues& kv, const fs::path& base_dir);
};

SweepParameter parse_sweep_parameter(const std::string& name);
const char* to_string(SweepParameter p);

/// Config for one sweep point; ConfigError when the value is not valid for the parameter.
CdaeConfig sweep_point_config(const SweepSpec& spec, double value);

struct SweepRow {
  double value;
  std::optional<double> mean_auc;
  std::string status;  // "ok" or the error message
};

/// One row per value: train, encode, classify. A failing value is recorded and the sweep continues.
std::vector<SweepRow> sweep(const SweepSpec& spec, std::ostream& log);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace cdae::app
