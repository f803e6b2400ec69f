// Pipeline driver: characterize a crossbar, train the desk network, map it
// onto tiles, remap columns, and measure inference accuracy. Every stage
// reads and writes artifacts in one run directory, so stages can be rerun
// or inspected independently.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "xbar/data.hpp"
#include "xbar/errors.hpp"
#include "xbar/error_model.hpp"
#include "xbar/inference.hpp"
#include "xbar/mapping.hpp"
#include "xbar/nn.hpp"
#include "xbar/remap.hpp"
#include "xbar/tech.hpp"

namespace {

using nlohmann::json;

struct Options {
  std::string out = "run";
  std::string config;  // explicit config file; else <out>/config.txt, else defaults
  std::string data_dir = "data";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int samples = 0;
  bool samples_given = false;
  std::string technology;
  bool dump_campaign = false;
  std::string strategy = "naive";
  std::string mode = "statistical";
  std::string split = "test";
  std::uint64_t noise_seed = 1;
  int limit = 0;  // 0: whole split
  int max_batches = -1;
  int seeds = 5;
};

std::string join(const std::string& dir, const std::string& name) {
  return dir + "/" + name;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw xbar::MissingArtifactError("cannot write " + path);
  return f;
}

xbar::ExperimentConfig resolve_config(const Options& opt) {
  xbar::ExperimentConfig cfg;
  if (!opt.config.empty()) {
    cfg = xbar::load_config(opt.config);
  } else if (std::filesystem::exists(join(opt.out, "config.txt"))) {
    cfg = xbar::load_config(join(opt.out, "config.txt"));
  } else {
    cfg = xbar::default_config();
  }
  if (opt.seed_given) cfg.seed = opt.seed;
  if (opt.samples_given) cfg.campaign.samples = opt.samples;
  if (!opt.technology.empty()) cfg.technology = xbar::technology_by_name(opt.technology);
  cfg.validate();
  return cfg;
}

xbar::LabeledDataset load_split(const Options& opt, const std::string& split) {
  std::string file;
  if (split == "train") file = "digits_train.txt";
  else if (split == "validation") file = "digits_val.txt";
  else if (split == "test") file = "digits_test.txt";
  else throw xbar::ConfigError("unknown split '" + split + "'");
  return xbar::load_dataset(join(opt.data_dir, file));
}

// First n samples of a split (0 keeps all); noise seeding follows the sample
// index, so a truncated evaluation matches the full one on its prefix.
xbar::LabeledDataset head(const xbar::LabeledDataset& ds, int n) {
  if (n <= 0 || n >= ds.count()) return ds;
  xbar::LabeledDataset out = ds;
  out.inputs = ds.inputs.leftCols(n).eval();
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
  return out;
}

json read_manifest(const std::string& dir) {
  std::ifstream in(join(dir, "manifest.json"));
  if (!in) return json::object();
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::parse_error& e) {
    throw xbar::ConfigError(join(dir, "manifest.json") + ": " + e.what());
  }
}

// One entry per command, merged so reruns update their own slice only.
// No timestamps: reruns with the same inputs must reproduce the file bitwise.
void update_manifest(const std::string& dir, const std::string& command, json entry) {
  json j = read_manifest(dir);
  j[command] = std::move(entry);
  auto f = open_out(join(dir, "manifest.json"));
  f << j.dump(2) << "\n";
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string mode_token(const std::string& mode) {
  return mode == "full-circuit" ? "full_circuit" : mode;
}

xbar::TileSet load_strategy_tiles(const Options& opt, const std::string& strategy) {
  return xbar::load_tileset(join(opt.out, "tiles_" + strategy + ".bin"));
}

void cmd_fit(const Options& opt) {
  xbar::ExperimentConfig cfg = resolve_config(opt);
  std::filesystem::create_directories(opt.out);
  {
    auto f = open_out(join(opt.out, "config.txt"));
    xbar::write_config(f, cfg);
  }

  std::printf("fit: %s %dx%d, %d samples, seed %llu\n", cfg.technology.name.c_str(),
              cfg.geometry.rows, cfg.geometry.cols, cfg.campaign.samples,
              static_cast<unsigned long long>(cfg.seed));
  xbar::Campaign campaign =
      xbar::run_campaign(cfg.technology, cfg.geometry, cfg.campaign.samples, cfg.seed);
  if (opt.dump_campaign) {
    auto f = open_out(join(opt.out, "campaign.csv"));
    xbar::write_campaign_csv(f, campaign);
  }
  xbar::ColumnErrorModel model = xbar::fit_columns(campaign);
  xbar::save_model(join(opt.out, "model.txt"), model);

  int last = model.cols() - 1;
  std::printf("fit: m[0] %.6f  m[%d] %.6f  mean c %.3e A  mean sigma %.3e A\n", model.m[0],
              last, model.m[last], model.c.mean(), model.sigma.mean());
  update_manifest(opt.out, "fit",
                  {{"technology", cfg.technology.name},
                   {"rows", cfg.geometry.rows},
                   {"cols", cfg.geometry.cols},
                   {"samples", cfg.campaign.samples},
                   {"seed", cfg.seed},
                   {"m_first", model.m[0]},
                   {"m_last", model.m[last]},
                   {"model", "model.txt"}});
}

void cmd_train(const Options& opt) {
  xbar::ExperimentConfig cfg = resolve_config(opt);
  std::filesystem::create_directories(opt.out);
  xbar::LabeledDataset train_split = load_split(opt, "train");
  xbar::LabeledDataset val_split = load_split(opt, "validation");

  xbar::NetworkParams start = xbar::init_network(xbar::desk_network_spec(), cfg.seed);
  std::printf("train: %d samples, %d epochs, lr %g, batch %d, seed %llu\n", train_split.count(),
              cfg.training.epochs, cfg.training.learning_rate, cfg.training.batch_size,
              static_cast<unsigned long long>(cfg.seed));
  xbar::TrainResult tr = xbar::train(start, train_split, cfg.training, cfg.seed);

  xbar::save_params(join(opt.out, "params.bin"), tr.params);
  {
    auto f = open_out(join(opt.out, "loss_curve.csv"));
    f << "epoch,loss\n";
    char buf[64];
    for (size_t e = 0; e < tr.loss_curve.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, tr.loss_curve[e]);
      f << buf;
    }
  }
  double val_acc = xbar::evaluate_accuracy(tr.params, val_split);
  std::printf("train: accuracy train %.4f  validation %.4f\n", tr.train_accuracy, val_acc);
  update_manifest(opt.out, "train",
                  {{"seed", cfg.seed},
                   {"epochs", cfg.training.epochs},
                   {"train_accuracy", tr.train_accuracy},
                   {"validation_accuracy", val_acc},
                   {"params", "params.bin"}});
}

void cmd_map(const Options& opt) {
  xbar::ExperimentConfig cfg = resolve_config(opt);
  xbar::NetworkParams params = xbar::load_params(join(opt.out, "params.bin"));
  xbar::TileSet ts = xbar::map_network(params, cfg.technology, cfg.geometry);
  xbar::save_tileset(join(opt.out, "tiles_naive.bin"), ts);
  {
    auto f = open_out(join(opt.out, "placement_naive.csv"));
    xbar::write_placement_csv(f, ts);
  }
  for (size_t l = 0; l < ts.layers.size(); ++l) {
    const auto& lm = ts.layers[l];
    std::printf("map: layer %zu  %dx%d logical on %dx%d tile blocks, scale %.6g\n", l,
                lm.logical_rows, lm.logical_cols, lm.row_blocks, lm.col_blocks, lm.scale);
  }
  update_manifest(opt.out, "map",
                  {{"technology", cfg.technology.name},
                   {"layers", ts.layers.size()},
                   {"tiles", "tiles_naive.bin"}});
}

void cmd_remap(const Options& opt) {
  xbar::ExperimentConfig cfg = resolve_config(opt);
  xbar::NetworkParams params = xbar::load_params(join(opt.out, "params.bin"));
  xbar::TileSet ts = load_strategy_tiles(opt, "naive");

  if (opt.strategy == "naive") {
    int moved = 0;
    for (auto& lm : ts.layers)
      moved += xbar::set_permutation(lm, xbar::identity_permutation(lm.logical_cols));
    xbar::save_tileset(join(opt.out, "tiles_naive.bin"), ts);
    {
      auto f = open_out(join(opt.out, "placement_naive.csv"));
      xbar::write_placement_csv(f, ts);
    }
    std::printf("remap naive: %d columns moved\n", moved);
    update_manifest(opt.out, "remap_naive",
                    {{"columns_moved", moved}, {"tiles", "tiles_naive.bin"}});
    return;
  }

  xbar::LabeledDataset train_split = load_split(opt, "train");

  if (opt.strategy == "srs") {
    xbar::RemapResult r = xbar::srs(params, ts, train_split);
    xbar::save_tileset(join(opt.out, "tiles_srs.bin"), ts);
    {
      auto f = open_out(join(opt.out, "placement_srs.csv"));
      xbar::write_placement_csv(f, ts);
    }
    {
      auto f = open_out(join(opt.out, "sensitivity_srs.csv"));
      xbar::write_sensitivity_csv(f, r.scores);
    }
    std::printf("remap srs: %d columns moved\n", r.columns_moved);
    update_manifest(opt.out, "remap_srs",
                    {{"columns_moved", r.columns_moved}, {"tiles", "tiles_srs.bin"}});
    return;
  }

  // drs: static pass first, then batchwise refinements that must strictly
  // beat the running placement on fixed-noise validation accuracy.
  xbar::ColumnErrorModel model = xbar::load_model(join(opt.out, "model.txt"));
  xbar::LabeledDataset val_split = load_split(opt, "validation");
  xbar::RemapResult init = xbar::srs(params, ts, train_split);
  xbar::DrsConfig dc;
  dc.batch_size = cfg.training.drs_batch_size;
  dc.max_batches = opt.max_batches;
  xbar::DrsResult dr = xbar::drs(params, ts, train_split, val_split, model, dc);

  xbar::save_tileset(join(opt.out, "tiles_drs.bin"), ts);
  {
    auto f = open_out(join(opt.out, "placement_drs.csv"));
    xbar::write_placement_csv(f, ts);
  }
  {
    auto f = open_out(join(opt.out, "drs_trace.csv"));
    xbar::write_drs_trace_csv(f, dr);
  }
  int adopted = 0;
  for (const auto& row : dr.trace) adopted += row.adopted ? 1 : 0;
  std::printf("remap drs: %d init + %d refine moves, %d/%zu batches adopted, accuracy %.4f -> %.4f\n",
              init.columns_moved, dr.columns_moved, adopted, dr.trace.size(),
              dr.start_accuracy, dr.best_accuracy);
  update_manifest(opt.out, "remap_drs",
                  {{"init_moves", init.columns_moved},
                   {"refine_moves", dr.columns_moved},
                   {"batches", dr.trace.size()},
                   {"adopted", adopted},
                   {"start_accuracy", dr.start_accuracy},
                   {"best_accuracy", dr.best_accuracy},
                   {"tiles", "tiles_drs.bin"}});
}

void cmd_eval(const Options& opt) {
  xbar::ExperimentConfig cfg = resolve_config(opt);
  (void)cfg;  // resolution validates the stored config
  xbar::NetworkParams params = xbar::load_params(join(opt.out, "params.bin"));
  xbar::TileSet ts = load_strategy_tiles(opt, opt.strategy);
  xbar::LabeledDataset split = head(load_split(opt, opt.split), opt.limit);

  xbar::ColumnErrorModel model;  // outlives the mode's pointer
  xbar::InferenceMode mode = xbar::InferenceMode::ideal();
  if (opt.mode == "statistical") {
    model = xbar::load_model(join(opt.out, "model.txt"));
    mode = xbar::InferenceMode::statistical(model, opt.noise_seed);
  } else if (opt.mode == "full-circuit") {
    mode = xbar::InferenceMode::full_circuit();
  }

  xbar::EvalReport rep = xbar::evaluate_noisy(params, ts, split, mode);
  json j{{"strategy", opt.strategy},
         {"mode", opt.mode},
         {"split", opt.split},
         {"samples", rep.samples},
         {"accuracy", rep.accuracy},
         {"noise_draws", rep.apply.draws},
         {"clamped_draws", rep.apply.clamps},
         {"clamp_rate", rep.clamp_rate()},
         {"layer_current_mae", rep.layer_current_mae},
         {"layer_readouts", rep.layer_readouts}};
  if (opt.mode == "statistical") j["noise_seed"] = opt.noise_seed;
  std::string name = "eval_" + opt.strategy + "_" + mode_token(opt.mode) + ".json";
  open_out(join(opt.out, name)) << j.dump(2) << "\n";

  std::printf("eval %s/%s on %s[%lld]: accuracy %.4f, clamp rate %.3g\n", opt.strategy.c_str(),
              opt.mode.c_str(), opt.split.c_str(), rep.samples, rep.accuracy, rep.clamp_rate());
  update_manifest(opt.out, "eval_" + opt.strategy + "_" + mode_token(opt.mode),
                  {{"split", opt.split},
                   {"samples", rep.samples},
                   {"accuracy", rep.accuracy},
                   {"report", name}});
}

void cmd_report(const Options& opt) {
  xbar::ExperimentConfig cfg = resolve_config(opt);
  (void)cfg;
  xbar::NetworkParams params = xbar::load_params(join(opt.out, "params.bin"));
  xbar::ColumnErrorModel model = xbar::load_model(join(opt.out, "model.txt"));
  xbar::LabeledDataset test = load_split(opt, "test");

  double clean = xbar::evaluate_accuracy(params, test);
  auto runs = open_out(join(opt.out, "report_runs.csv"));
  runs << "strategy,noise_seed,accuracy\n";
  char buf[160];
  std::snprintf(buf, sizeof buf, "clean,0,%.17g\n", clean);
  runs << buf;

  json entry{{"split", "test"}, {"noise_seeds", opt.seeds}, {"clean", clean}};
  auto table = open_out(join(opt.out, "report.csv"));
  table << "strategy,median_accuracy,mean_accuracy,min_accuracy,max_accuracy\n";
  std::snprintf(buf, sizeof buf, "clean,%.17g,%.17g,%.17g,%.17g\n", clean, clean, clean, clean);
  table << buf;
  std::printf("report: clean %.4f\n", clean);

  for (const std::string& strategy : {"naive", "srs", "drs"}) {
    xbar::TileSet ts = load_strategy_tiles(opt, strategy);
    std::vector<double> acc;
    for (int s = 1; s <= opt.seeds; ++s) {
      auto mode = xbar::InferenceMode::statistical(model, static_cast<std::uint64_t>(s));
      xbar::EvalReport rep = xbar::evaluate_noisy(params, ts, test, mode);
      acc.push_back(rep.accuracy);
      std::snprintf(buf, sizeof buf, "%s,%d,%.17g\n", strategy.c_str(), s, rep.accuracy);
      runs << buf;
    }
    double med = median(acc);
    double mean = 0.0;
    for (double a : acc) mean += a;
    mean /= acc.size();
    auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g\n", strategy.c_str(), med, mean,
                  *lo, *hi);
    table << buf;
    std::printf("report: %-5s median %.4f  mean %.4f  [%.4f, %.4f] over %d noise seeds\n",
                strategy.c_str(), med, mean, *lo, *hi, opt.seeds);
    entry[strategy] = {{"median", med}, {"mean", mean}, {"min", *lo}, {"max", *hi}};
  }
  update_manifest(opt.out, "report", entry);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossbar line-resistance error pipeline"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub, bool with_data) {
    sub->add_option("--out", opt.out, "run directory for artifacts")->capture_default_str();
    sub->add_option("--config", opt.config, "config file (default: <out>/config.txt if present)");
    if (with_data)
      sub->add_option("--data-dir", opt.data_dir, "dataset directory")->capture_default_str();
  };

  auto* fit = app.add_subcommand("fit", "run the characterization campaign and fit the error model");
  add_common(fit, false);
  auto* fit_seed = fit->add_option("--seed", opt.seed, "campaign RNG seed");
  auto* fit_samples = fit->add_option("--samples", opt.samples, "campaign (V,R) draws")
                          ->check(CLI::PositiveNumber);
  fit->add_option("--technology", opt.technology, "built-in technology (TaOx, PCM, Ag/Si)");
  fit->add_flag("--dump-campaign", opt.dump_campaign, "also write campaign.csv");
  fit->callback([&] {
    opt.seed_given = fit_seed->count() > 0;
    opt.samples_given = fit_samples->count() > 0;
    cmd_fit(opt);
  });

  auto* train = app.add_subcommand("train", "train the desk network digitally");
  add_common(train, true);
  auto* train_seed = train->add_option("--seed", opt.seed, "init and shuffle RNG seed");
  train->callback([&] {
    opt.seed_given = train_seed->count() > 0;
    cmd_train(opt);
  });

  auto* map = app.add_subcommand("map", "lay the trained network onto tiles (naive placement)");
  add_common(map, false);
  map->callback([&] { cmd_map(opt); });

  auto* remap = app.add_subcommand("remap", "re-place columns by sensitivity");
  add_common(remap, true);
  remap->add_option("--strategy", opt.strategy, "naive | srs | drs")
      ->required()
      ->check(CLI::IsMember({"naive", "srs", "drs"}));
  remap->add_option("--max-batches", opt.max_batches, "drs: cap on sensitivity batches (-1: one pass)")
      ->capture_default_str();
  remap->callback([&] { cmd_remap(opt); });

  auto* eval = app.add_subcommand("eval", "evaluate a mapped network on a split");
  add_common(eval, true);
  eval->add_option("--strategy", opt.strategy, "placement to evaluate")
      ->capture_default_str()
      ->check(CLI::IsMember({"naive", "srs", "drs"}));
  eval->add_option("--mode", opt.mode, "inference model")
      ->capture_default_str()
      ->check(CLI::IsMember({"ideal", "statistical", "full-circuit"}));
  eval->add_option("--split", opt.split, "dataset split")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "validation", "test"}));
  eval->add_option("--noise-seed", opt.noise_seed, "statistical noise seed")->capture_default_str();
  eval->add_option("--limit", opt.limit, "evaluate only the first N samples (0: all)")
      ->capture_default_str();
  eval->callback([&] { cmd_eval(opt); });

  auto* report = app.add_subcommand("report", "compare placements on the test split");
  add_common(report, true);
  report->add_option("--seeds", opt.seeds, "statistical noise seeds (1..N)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  report->callback([&] { cmd_report(opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const xbar::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const xbar::MissingArtifactError& e) {
    std::fprintf(stderr, "missing artifact: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
