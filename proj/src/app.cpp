#include "cdae/app.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <sstream>

#include "cdae/checkpoint.hpp"
#include "cdae/errors.hpp"
#include "cdae/io.hpp"

namespace cdae::app {

std::vector<data::GeneRecord> load_prepared(const fs::path& manifest, const CdaeConfig& config,
                                            std::ostream& log) {
  auto records = data::load_dataset(manifest);
  for (auto& r : records) {
    if (r.image.extent(1) < config.input_height || r.image.extent(2) < config.input_width) {
      throw ShapeError("image for " + r.gene_id + " is " + std::to_string(r.image.extent(1)) + "x" +
                       std::to_string(r.image.extent(2)) + ", smaller than the network input " +
                       std::to_string(config.input_height) + "x" + std::to_string(config.input_width));
    }
    bool degenerate = false;
    r.image = data::prepare(r.image, config.input_height, config.input_width, &degenerate);
    if (degenerate) log << "warning: constant image for " << r.gene_id << " normalized to zeros\n";
  }
  return records;
}

data::RepresentationSet encode_records(const Network& network,
                                       const std::vector<data::GeneRecord>& prepared) {
  data::RepresentationSet set;
  const auto n = static_cast<std::ptrdiff_t>(prepared.size());
  set.features.resize(n, static_cast<Eigen::Index>(network.config().code_length()));
  std::vector<std::exception_ptr> errors(prepared.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto code = network.encode(prepared[i].image, nn::Exec::kSerial);
      for (std::size_t j = 0; j < code.size(); ++j) set.features(i, static_cast<Eigen::Index>(j)) = code[j];
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (const auto& r : prepared) set.gene_ids.push_back(r.gene_id);
  return set;
}

std::string loss_history_csv(const LossHistory& history) {
  std::string out = "epoch,learning_rate,mean_loss\n";
  for (std::size_t e = 0; e < history.epochs(); ++e) {
    out += std::to_string(e) + "," + io::format_double(history.learning_rate[e]) + "," +
           io::format_double(history.mean_loss[e]) + "\n";
  }
  return out;
}

LossHistory train_cdae(const TrainCdaeArgs& args, std::ostream& log) {
  args.config.validate();
  const auto records = load_prepared(args.manifest, args.config, log);
  std::vector<Tensor> images;
  images.reserve(records.size());
  for (const auto& r : records) images.push_back(r.image);

  Network net = Network::build(args.config);
  log << "training on " << images.size() << " images, " << net.parameter_count()
      << " parameters, code length " << args.config.code_length() << "\n";
  TrainOptions opts;
  opts.on_epoch = [&](std::size_t e, double lr, double loss) {
    log << "epoch " << e << " lr " << lr << " loss " << loss << "\n";
  };
  const LossHistory history = train(net, images, opts);

  save_checkpoint(net, args.checkpoint);
  fs::path loss_path = args.loss_csv ? *args.loss_csv : fs::path(args.checkpoint.string() + ".loss.csv");
  io::write_file_atomic(loss_path, loss_history_csv(history));
  return history;
}

void encode(const fs::path& checkpoint, const fs::path& manifest, const fs::path& out,
            std::ostream& log) {
  const Network net = load_checkpoint(checkpoint);
  const auto records = load_prepared(manifest, net.config(), log);
  const auto set = encode_records(net, records);
  set.save(out);
  log << "encoded " << set.gene_ids.size() << " genes into " << set.features.cols() << "-dim codes\n";
}

namespace {

metrics::AucReport evaluate_representations(const data::RepresentationSet& reps,
                                            go::AnnotationTable table, std::uint64_t seed,
                                            std::size_t min_positives, std::size_t max_positives,
                                            const go::CvOptions& cv, std::ostream& log) {
  std::vector<std::string> warnings = table.restrict_to(reps.gene_ids);
  std::size_t annotated = 0;
  for (const auto& [cat, genes] : table.categories) annotated += genes.size();
  if (annotated == 0) throw DataError("no annotated gene has a representation");
  for (auto& w : table.filter_sizes(min_positives, max_positives)) warnings.push_back(std::move(w));

  auto report = go::evaluate_all(reps.features, reps.gene_ids, table, seed, cv);
  warnings.insert(warnings.end(), report.warnings.begin(), report.warnings.end());
  report.warnings = std::move(warnings);
  for (const auto& w : report.warnings) log << "warning: " << w << "\n";
  return report;
}

}  // namespace

metrics::AucReport classify(const ClassifyArgs& args, std::ostream& log) {
  const auto reps = data::RepresentationSet::load(args.representations);
  auto table = go::AnnotationTable::load_tsv(args.annotations);
  auto report = evaluate_representations(reps, std::move(table), args.seed, args.min_positives,
                                         args.max_positives, args.cv, log);
  report.baseline_auc = args.baseline_auc;
  if (report.categories.empty()) throw MetricError("no category could be evaluated");
  io::write_file_atomic(args.report, report.to_csv());
  return report;
}

std::string classify_summary(const metrics::AucReport& report) {
  const auto mean = report.overall_mean();
  if (!mean) throw MetricError("no category could be evaluated");
  char buf[160];
  std::snprintf(buf, sizeof(buf), "categories %zu, mean AUC %.4f\n", report.categories.size(), *mean);
  std::string out = buf;
  if (const auto er = report.error_reduction()) {
    std::snprintf(buf, sizeof(buf), "baseline AUC %.4f, error reduction %.1f%%\n", *report.baseline_auc,
                  100.0 * *er);
    out += buf;
  }
  return out;
}

SweepParameter parse_sweep_parameter(const std::string& name) {
  if (name == "denoising_rate") return SweepParameter::kDenoisingRate;
  if (name == "kernel_size") return SweepParameter::kKernelSize;
  if (name == "representation_size") return SweepParameter::kRepresentationSize;
  throw ConfigError("unknown sweep parameter '" + name +
                    "' (expected denoising_rate, kernel_size or representation_size)");
}

const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::kDenoisingRate: return "denoising_rate";
    case SweepParameter::kKernelSize: return "kernel_size";
    case SweepParameter::kRepresentationSize: return "representation_size";
  }
  return "?";
}

SweepSpec SweepSpec::from(const KeyValues& kv, const fs::path& base_dir) {
  SweepSpec s;
  s.parameter = parse_sweep_parameter(kv.get_string("parameter", "denoising_rate"));
  s.values = kv.get_doubles("values", {});
  if (s.values.empty()) throw ConfigError("sweep: 'values' must list at least one value");
  auto resolve = [&](const std::string& key) {
    auto v = kv.get(key);
    if (!v) throw ConfigError("sweep: missing '" + key + "'");
    fs::path p = *v;
    return p.is_relative() ? base_dir / p : p;
  };
  s.manifest = resolve("manifest");
  s.annotations = resolve("annotations");
  s.min_positives = kv.get_size("min_positives", s.min_positives);
  s.max_positives = kv.get_size("max_positives", s.max_positives);
  s.cv.lambda_grid = kv.get_doubles("lambda_grid", s.cv.lambda_grid);
  s.base = cdae_config_from(kv);
  return s;
}

CdaeConfig sweep_point_config(const SweepSpec& spec, double value) {
  CdaeConfig c = spec.base;
  switch (spec.parameter) {
    case SweepParameter::kDenoisingRate:
      if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("denoising rate must be in [0,1]");
      c.denoising_rate = value;
      break;
    case SweepParameter::kKernelSize: {
      const auto k = static_cast<std::size_t>(value);
      if (value != static_cast<double>(k) || k % 2 == 0) throw ConfigError("kernel size must be an odd integer");
      c.kernel_size = k;
      break;
    }
    case SweepParameter::kRepresentationSize: {
      // Keep the input size and aspect ratio; pick the pool depth that yields `value` codes.
      const auto v = static_cast<std::size_t>(value);
      bool found = false;
      if (value == static_cast<double>(v) && v > 0) {
        for (std::size_t p = 1; p <= 16 && !found; ++p) {
          const std::size_t div = std::size_t{1} << p;
          if (c.input_height % div || c.input_width % div) break;
          if ((c.input_height / div) * (c.input_width / div) == v) {
            c.num_pool_stages = p;
            found = true;
          }
        }
      }
      if (!found) {
        throw ConfigError("representation size " + io::format_double(value) + " is not reachable from a " +
                          std::to_string(c.input_height) + "x" + std::to_string(c.input_width) + " input");
      }
      break;
    }
  }
  c.validate();
  return c;
}

std::vector<SweepRow> sweep(const SweepSpec& spec, std::ostream& log) {
  const auto raw = data::load_dataset(spec.manifest);
  const auto table = go::AnnotationTable::load_tsv(spec.annotations);
  std::vector<SweepRow> rows;
  for (double value : spec.values) {
    SweepRow row{value, std::nullopt, "ok"};
    try {
      const CdaeConfig cfg = sweep_point_config(spec, value);
      log << "sweep " << to_string(spec.parameter) << " = " << value << "\n";
      std::vector<data::GeneRecord> prepared;
      std::vector<Tensor> images;
      for (const auto& r : raw) {
        prepared.push_back({r.gene_id, data::prepare(r.image, cfg.input_height, cfg.input_width)});
        images.push_back(prepared.back().image);
      }
      Network net = Network::build(cfg);
      train(net, images);
      const auto reps = encode_records(net, prepared);
      const auto report = evaluate_representations(reps, table, cfg.seed, spec.min_positives,
                                                   spec.max_positives, spec.cv, log);
      row.mean_auc = report.overall_mean();
      if (!row.mean_auc) throw MetricError("no category could be evaluated");
    } catch (const std::exception& e) {
      row.mean_auc.reset();
      row.status = std::string("failed: ") + e.what();
      log << "sweep value " << value << " " << row.status << "\n";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "value,mean_auc,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (auto& ch : status)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ' ';
    out += io::format_double(r.value) + "," + (r.mean_auc ? io::format_double(*r.mean_auc) : "") + "," +
           status + "\n";
  }
  return out;
}

}  // namespace cdae::app
