// Command-line front end: synthesize, train-cdae, encode, train-classifiers (classify), sweep.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdae/app.hpp"
#include "cdae/errors.hpp"
#include "cdae/io.hpp"
#include "cdae/kernels.hpp"

namespace {

namespace fs = std::filesystem;
using namespace cdae;

struct Shared {
  std::string config;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  bool deterministic = false;
  std::string out;
  std::vector<std::string> overrides;
};

void add_shared(CLI::App* cmd, Shared& s, bool out_required = true) {
  cmd->add_option("--config", s.config, "key=value config file");
  cmd->add_option("--seed", s.seed, "seed for every random stream (overrides the config)");
  cmd->add_option("--workers", s.workers, "worker threads (0: OpenMP default)");
  cmd->add_flag("--deterministic", s.deterministic,
                "fixed-order reductions (always on; accepted for script compatibility)");
  auto* out = cmd->add_option("--out", s.out, "output path");
  if (out_required) out->required();
  cmd->add_option("--set", s.overrides, "override a config key: --set key=value (repeatable)");
}

KeyValues load_kv(const Shared& s) {
  KeyValues kv = s.config.empty() ? KeyValues{} : KeyValues::load(s.config);
  for (const auto& o : s.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    kv.set(io::trim(o.substr(0, eq)), io::trim(o.substr(eq + 1)));
  }
  if (s.seed) kv.set("seed", std::to_string(*s.seed));
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional denoising autoencoder features for gene-expression images"};
  app.require_subcommand(1);

  Shared syn_s, train_s, enc_s, cls_s, sweep_s;

  auto* syn = app.add_subcommand("synthesize", "write a synthetic ISH-like dataset (images, manifest, annotations)");
  add_shared(syn, syn_s);

  std::string train_manifest, loss_csv;
  auto* train = app.add_subcommand("train-cdae", "train the autoencoder and write a checkpoint");
  add_shared(train, train_s);
  train->add_option("--dataset", train_manifest, "manifest TSV gene_id<TAB>image_path")->required();
  train->add_option("--loss-csv", loss_csv, "loss history CSV (default <out>.loss.csv)");

  std::string enc_ckpt, enc_manifest;
  auto* enc = app.add_subcommand("encode", "write encoder representations for a dataset");
  add_shared(enc, enc_s);
  enc->add_option("--checkpoint", enc_ckpt, "trained checkpoint")->required();
  enc->add_option("--dataset", enc_manifest, "manifest TSV")->required();

  std::string cls_reps, cls_ann;
  std::optional<double> baseline;
  auto* cls = app.add_subcommand("train-classifiers", "nested-CV logistic regression per GO category");
  cls->alias("classify");
  add_shared(cls, cls_s);
  cls->add_option("--representations", cls_reps, "representation file from `encode`")->required();
  cls->add_option("--annotations", cls_ann, "annotation TSV category_id<TAB>gene_id")->required();
  cls->add_option("--baseline-auc", baseline, "report error reduction against this mean AUC");

  auto* sw = app.add_subcommand("sweep", "train/encode/classify over a list of parameter values");
  add_shared(sw, sweep_s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::kConfig);
  }

  try {
    for (const Shared* s : {&syn_s, &train_s, &enc_s, &cls_s, &sweep_s}) {
      if (s->workers > 0) kernels::set_worker_count(s->workers);
    }

    if (*syn) {
      const auto kv = load_kv(syn_s);
      const auto spec = data::SyntheticSpec::from(kv);
      kv.reject_unused("synthesize");
      const auto ds = data::synthesize(spec);
      data::write_dataset(ds, syn_s.out);
      std::cerr << "wrote " << ds.records.size() << " images and " << ds.annotations.categories.size()
                << " categories to " << syn_s.out << "\n";
    } else if (*train) {
      const auto kv = load_kv(train_s);
      app::TrainCdaeArgs args;
      args.config = cdae_config_from(kv);
      kv.reject_unused("train-cdae");
      args.manifest = train_manifest;
      args.checkpoint = train_s.out;
      if (!loss_csv.empty()) args.loss_csv = fs::path(loss_csv);
      const auto history = app::train_cdae(args, std::cerr);
      if (history.epochs() > 0) {
        std::printf("final mean loss %.6g after %zu epochs\n", history.mean_loss.back(), history.epochs());
      }
    } else if (*enc) {
      app::encode(enc_ckpt, enc_manifest, enc_s.out, std::cerr);
    } else if (*cls) {
      const auto kv = load_kv(cls_s);
      app::ClassifyArgs args;
      args.representations = cls_reps;
      args.annotations = cls_ann;
      args.report = cls_s.out;
      args.seed = kv.get_u64("seed", args.seed);
      args.baseline_auc = baseline;
      args.min_positives = kv.get_size("min_positives", args.min_positives);
      args.max_positives = kv.get_size("max_positives", args.max_positives);
      args.cv.lambda_grid = kv.get_doubles("lambda_grid", args.cv.lambda_grid);
      kv.reject_unused("train-classifiers");
      const auto report = app::classify(args, std::cerr);
      std::fputs(app::classify_summary(report).c_str(), stdout);
    } else if (*sw) {
      if (sweep_s.config.empty()) throw ConfigError("sweep needs --config <sweep spec>");
      const auto kv = load_kv(sweep_s);
      const auto spec = app::SweepSpec::from(kv, fs::path(sweep_s.config).parent_path());
      kv.reject_unused("sweep");
      const auto rows = app::sweep(spec, std::cerr);
      io::write_file_atomic(sweep_s.out, app::sweep_csv(rows));
      std::fputs(app::sweep_csv(rows).c_str(), stdout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
