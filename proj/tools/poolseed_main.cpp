#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "poolseed/config.hpp"
#include "poolseed/dataset.hpp"
#include "poolseed/demo.hpp"
#include "poolseed/error.hpp"
#include "poolseed/runner.hpp"

namespace {

using namespace poolseed;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Err::ConfigParse:
    case Err::Validation:
    case Err::InvalidGridKey:
    case Err::ConfigInvalid:
    case Err::FractionOutOfRange:
    case Err::InvalidArgument:
      return 1;
    default:
      return 2;
  }
}

// grid values arrive as comma-separated literals; JSON scalars when they
// parse, strings otherwise
std::vector<nlohmann::json> parse_grid_values(const std::string& csv) {
  std::vector<nlohmann::json> out;
  std::string cell;
  std::stringstream ss(csv);
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(nlohmann::json::parse(cell));
    } catch (const nlohmann::json::parse_error&) {
      out.push_back(cell);
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::string cell;
  std::stringstream ss(csv);
  while (std::getline(ss, cell, ',')) out.push_back(std::stoull(cell));
  return out;
}

int cmd_gen_data(const std::string& kind, const std::string& out_dir, int n, int classes, int side,
                 double sigma, double factor, std::uint64_t seed, const std::string& images,
                 const std::string& labels) {
  std::filesystem::create_directories(out_dir);
  if (kind == "two-gaussians") {
    const DataTable table = generate_two_gaussians(n, {-2.0, 0.0}, {2.0, 0.0}, sigma, seed);
    save_csv(table, out_dir + "/two_gaussians.csv");
    std::printf("wrote %s/two_gaussians.csv (%d rows)\n", out_dir.c_str(), table.rows());
  } else if (kind == "synth-digits") {
    const DataTable table = generate_synthetic_digits(n, classes, side, seed);
    save_idx(table, out_dir + "/digits-images.idx", out_dir + "/digits-labels.idx");
    std::printf("wrote %s/digits-{images,labels}.idx (%d rows, %d classes)\n", out_dir.c_str(),
                table.rows(), table.class_count);
  } else if (kind == "subset") {
    const DataTable table = load_idx(images, labels);
    const DataTable sub = stratified_subset(table, n, seed);
    save_idx(sub, out_dir + "/subset-images.idx", out_dir + "/subset-labels.idx");
    std::printf("wrote %s/subset-{images,labels}.idx (%d of %d rows)\n", out_dir.c_str(),
                sub.rows(), table.rows());
  } else if (kind == "longtail") {
    const DataTable table = load_idx(images, labels);
    const DataTable tail = apply_longtail(table, factor, seed);
    save_idx(tail, out_dir + "/longtail-images.idx", out_dir + "/longtail-labels.idx");
    std::printf("wrote %s/longtail-{images,labels}.idx (%d of %d rows)\n", out_dir.c_str(),
                tail.rows(), table.rows());
  } else {
    fail(Err::Validation, "unknown gen-data kind '" + kind + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"poolseed: active-learning initial-pool laboratory"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "trial-level parallelism (0 = all cores)");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate or derive datasets");
  std::string gen_kind = "synth-digits", gen_out = "data", gen_images, gen_labels;
  int gen_n = 2000, gen_classes = 10, gen_side = 28;
  double gen_sigma = 1.0, gen_factor = 10.0;
  std::uint64_t gen_seed = 1;
  gen->add_option("--kind", gen_kind, "two-gaussians | synth-digits | subset | longtail");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--n", gen_n, "sample count (generators, subset)");
  gen->add_option("--classes", gen_classes, "class count (synth-digits)");
  gen->add_option("--side", gen_side, "image side (synth-digits)");
  gen->add_option("--sigma", gen_sigma, "gaussian sigma (two-gaussians)");
  gen->add_option("--factor", gen_factor, "imbalance factor (longtail)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--images", gen_images, "input idx image file (subset, longtail)");
  gen->add_option("--labels", gen_labels, "input idx label file (subset, longtail)");

  // run
  auto* run = app.add_subcommand("run", "run one experiment config over its seeds");
  std::string run_config, run_out, run_seeds_csv;
  bool run_force = false;
  run->add_option("--config", run_config, "experiment config (json)")->required();
  run->add_option("--out", run_out, "results directory (default $POOLSEED_RESULTS or ./results)");
  run->add_option("--seeds", run_seeds_csv, "comma-separated seed override");
  run->add_flag("--force", run_force, "overwrite existing records for this fingerprint");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a config grid");
  std::string sweep_config, sweep_out;
  std::vector<std::string> sweep_sets;
  bool sweep_force = false;
  sweep->add_option("--config", sweep_config, "base experiment config (json)")->required();
  sweep->add_option("--out", sweep_out, "results directory");
  sweep->add_option("--set", sweep_sets,
                    "grid axis as key=v1,v2,... (repeatable; dotted config paths)");
  sweep->add_flag("--force", sweep_force, "overwrite existing records");

  // report
  auto* rep = app.add_subcommand("report", "aggregate records into curves/overlaps/projections");
  std::string rep_results, rep_out = "report";
  rep->add_option("--results", rep_results, "directory containing record .jsonl files");
  rep->add_option("--out", rep_out, "report output directory");

  // demo-fig1
  auto* fig1 = app.add_subcommand("demo-fig1", "two-Gaussian toy demo");
  std::string fig1_out = "demo_fig1";
  std::uint64_t fig1_seed = 7;
  fig1->add_option("--out", fig1_out, "output directory");
  fig1->add_option("--seed", fig1_seed, "demo seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_data(gen_kind, gen_out, gen_n, gen_classes, gen_side, gen_sigma, gen_factor,
                          gen_seed, gen_images, gen_labels);

    if (run->parsed()) {
      config::ExperimentConfig cfg = config::load_config(run_config);
      if (!run_seeds_csv.empty()) cfg.seeds = parse_seed_list(run_seeds_csv);
      runner::RunOptions opt;
      opt.threads = threads;
      opt.force = run_force;
      const std::string out = run_out.empty() ? runner::default_results_root() : run_out;
      const std::string path = runner::run_seeds(cfg, out, opt);
      std::printf("records: %s\n", path.c_str());
      return 0;
    }

    if (sweep->parsed()) {
      std::ifstream in(sweep_config);
      require(in.good(), Err::ConfigParse, "cannot open config " + sweep_config);
      nlohmann::json base;
      try {
        base = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        fail(Err::ConfigParse, sweep_config + ": " + e.what());
      }
      config::parse_config(base);  // validate before expanding
      std::vector<runner::GridAxis> grid;
      for (const std::string& s : sweep_sets) {
        const auto eq = s.find('=');
        require(eq != std::string::npos, Err::InvalidGridKey,
                "--set expects key=v1,v2,... got '" + s + "'");
        grid.push_back({s.substr(0, eq), parse_grid_values(s.substr(eq + 1))});
      }
      runner::RunOptions opt;
      opt.threads = threads;
      opt.force = sweep_force;
      const std::string out = sweep_out.empty() ? runner::default_results_root() : sweep_out;
      const auto result = runner::run_sweep(base, grid, out, opt);
      std::printf("sweep complete: %zu cells, index at %s/index.csv\n",
                  result.fingerprints.size(), out.c_str());
      return 0;
    }

    if (rep->parsed()) {
      const std::string results =
          rep_results.empty() ? runner::default_results_root() : rep_results;
      runner::LoadStats stats;
      const auto groups = runner::load_records(results, &stats);
      runner::write_report(groups, rep_out);
      std::printf("report: %d files, %d records (%d corrupt lines skipped), %zu groups -> %s\n",
                  stats.files, stats.records, stats.skipped_lines, groups.size(),
                  rep_out.c_str());
      return 0;
    }

    if (fig1->parsed()) {
      const auto result = demo::run_demo_fig1(fig1_out, fig1_seed);
      std::printf("demo-fig1: bayes %.4f full %.4f random35 %.4f lc35 %.4f me35 %.4f -> %s\n",
                  result.bayes_accuracy, result.mean("full"), result.mean("random35"),
                  result.mean("lc35"), result.mean("me35"), fig1_out.c_str());
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
