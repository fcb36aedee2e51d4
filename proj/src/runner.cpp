#include "poolseed/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "poolseed/error.hpp"
#include "poolseed/report.hpp"

namespace fs = std::filesystem;

namespace poolseed::runner {

namespace {

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(out.good(), Err::IoFailure, "cannot write " + tmp);
    out << content;
    require(out.good(), Err::IoFailure, "write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

// Trials are independent given their seeds; results are collected by slot so
// output order never depends on scheduling.
template <typename Fn>
void parallel_for(int count, int threads, Fn fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string group_label(const config::ExperimentConfig& cfg) {
  return cfg.initial.name() + " + " + cfg.query.name();
}

}  // namespace

std::string default_results_root() {
  if (const char* env = std::getenv("POOLSEED_RESULTS")) return env;
  return "results";
}

std::string run_seeds(const config::ExperimentConfig& config, const std::string& out_dir,
                      const RunOptions& options) {
  fs::create_directories(out_dir);
  const std::string fingerprint = config.fingerprint();
  const std::string record_path = out_dir + "/" + fingerprint + ".jsonl";
  require(options.force || !fs::exists(record_path), Err::Validation,
          record_path + " already exists for this config fingerprint (use --force to overwrite)");

  const config::PreparedData data = config::prepare_data(config);
  const al::ALConfig al_cfg = config.al_config();
  al_cfg.validate(data.splits.train.size());

  std::vector<al::ExperimentRecord> records(config.seeds.size());
  std::mutex log_mutex;
  parallel_for(static_cast<int>(config.seeds.size()), options.threads, [&](int i) {
    al::ALConfig cfg_i = al_cfg;
    if (cfg_i.debug_scores) {
      cfg_i.debug_dir = out_dir + "/debug_" + fingerprint + "_s" + std::to_string(config.seeds[i]);
      fs::create_directories(cfg_i.debug_dir);
    }
    records[i] = al::run_trial(data.table, data.splits, cfg_i, config.seeds[i]);
    records[i].fingerprint = fingerprint;
    if (!options.quiet) {
      std::lock_guard<std::mutex> lock(log_mutex);
      std::printf("[%s] seed %llu done: final acc %.4f (%zu/%zu)\n", fingerprint.c_str(),
                  static_cast<unsigned long long>(config.seeds[i]),
                  records[i].test_accuracy.back(), std::size_t(i) + 1, config.seeds.size());
      std::fflush(stdout);
    }
  });

  std::string body;
  std::string timing;
  for (const auto& record : records) {
    nlohmann::json j = config::record_to_json(record);
    j["config"] = config.canonical();
    body += j.dump();
    body += "\n";
    nlohmann::json t;
    t["fingerprint"] = record.fingerprint;
    t["seed"] = record.seed;
    t["wall_time_s"] = record.wall_time_s;
    timing += t.dump();
    timing += "\n";
  }
  atomic_write(record_path, body);
  atomic_write(out_dir + "/" + fingerprint + ".timing.jsonl", timing);
  return record_path;
}

SweepResult run_sweep(const nlohmann::json& base_config, const std::vector<GridAxis>& grid,
                      const std::string& out_dir, const RunOptions& options) {
  fs::create_directories(out_dir);
  // expand the Cartesian product depth-first, earlier axes outermost
  std::vector<nlohmann::json> cells{base_config};
  for (const auto& axis : grid) {
    require(!axis.values.empty(), Err::InvalidGridKey, "grid axis '" + axis.key + "' is empty");
    std::vector<nlohmann::json> expanded;
    expanded.reserve(cells.size() * axis.values.size());
    for (const auto& cell : cells) {
      for (const auto& value : axis.values) {
        nlohmann::json next = cell;
        config::apply_override(next, axis.key, value);
        expanded.push_back(std::move(next));
      }
    }
    cells = std::move(expanded);
  }

  SweepResult result;
  std::string index = "fingerprint,records,overrides\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const config::ExperimentConfig cfg = config::parse_config(cells[c]);
    if (!options.quiet)
      std::printf("-- sweep cell %zu/%zu: %s\n", c + 1, cells.size(), group_label(cfg).c_str());
    const std::string record_path = run_seeds(cfg, out_dir, options);
    result.fingerprints.push_back(cfg.fingerprint());
    result.record_files.push_back(record_path);

    nlohmann::json overrides = nlohmann::json::object();
    std::size_t stride = cells.size();
    std::size_t rest = c;
    for (const auto& axis : grid) {
      stride /= axis.values.size();
      overrides[axis.key] = axis.values[rest / stride];
      rest %= stride;
    }
    index += cfg.fingerprint() + "," + fs::path(record_path).filename().string() + ",\"" +
             [&overrides] {
               std::string s = overrides.dump();
               std::string escaped;
               for (char ch : s)
                 escaped += (ch == '"') ? std::string("\"\"") : std::string(1, ch);
               return escaped;
             }() +
             "\"\n";
  }
  atomic_write(out_dir + "/index.csv", index);
  return result;
}

std::vector<RecordGroup> load_records(const std::string& results_dir, LoadStats* stats) {
  require(fs::exists(results_dir), Err::NoRecordsFound, results_dir + " does not exist");
  std::map<std::string, RecordGroup> groups;
  LoadStats local;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".jsonl" || name.find(".timing.") != std::string::npos)
      continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    ++local.files;
    std::ifstream in(file);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const nlohmann::json j = nlohmann::json::parse(line);
        al::ExperimentRecord record = config::record_from_json(j);
        auto& group = groups[record.fingerprint];
        if (group.records.empty()) {
          group.fingerprint = record.fingerprint;
          group.config = config::parse_config(j.at("config"));
          group.label = group_label(group.config);
        }
        group.records.push_back(std::move(record));
        ++local.records;
      } catch (const std::exception& e) {
        std::fprintf(stderr, "warning: skipping %s:%d: %s\n", file.string().c_str(), line_no,
                     e.what());
        ++local.skipped_lines;
      }
    }
  }
  require(local.records > 0, Err::NoRecordsFound, "no valid records under " + results_dir);
  if (stats) *stats = local;
  std::vector<RecordGroup> out;
  out.reserve(groups.size());
  for (auto& [_, group] : groups) out.push_back(std::move(group));
  return out;
}

void write_report(const std::vector<RecordGroup>& groups, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<report::NamedCurve> named;
  for (const auto& group : groups) {
    const report::Curve curve = report::aggregate_curves(group.records);
    report::emit_curve_csv(curve, out_dir + "/curve_" + group.fingerprint + ".csv");
    report::emit_curve_jsonl(curve, out_dir + "/curve_" + group.fingerprint + ".jsonl");
    named.push_back({group.label, curve});
  }
  report::emit_curves_svg(named, out_dir + "/curves.svg");

  // pairwise labeled-pool overlap between matching seeds
  std::vector<report::OverlapRow> overlaps;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      for (const auto& ra : groups[a].records) {
        for (const auto& rb : groups[b].records) {
          if (ra.seed != rb.seed || ra.dataset_fp != rb.dataset_fp) continue;
          if (ra.cycle_indices.size() != rb.cycle_indices.size()) continue;
          const auto jac = report::pool_overlap(ra, rb);
          for (std::size_t t = 0; t < jac.size(); ++t)
            overlaps.push_back({groups[a].label, groups[b].label, ra.seed,
                                static_cast<int>(t), jac[t]});
        }
      }
    }
  }
  report::emit_overlaps_csv(overlaps, out_dir + "/overlaps.csv");

  // guided-vs-random margins against the random-initial baseline with the
  // same query strategy and dataset
  std::vector<report::MarginRow> margins;
  for (const auto& group : groups) {
    if (group.config.initial.kind == initpool::StrategyKind::Random) continue;
    for (const auto& baseline : groups) {
      if (baseline.config.initial.kind != initpool::StrategyKind::Random) continue;
      if (baseline.config.query.name() != group.config.query.name()) continue;
      if (baseline.records.front().dataset_fp != group.records.front().dataset_fp) continue;
      const auto gc = report::aggregate_curves(group.records);
      const auto bc = report::aggregate_curves(baseline.records);
      if (gc.mean.size() != bc.mean.size()) continue;
      for (std::size_t t = 0; t < gc.mean.size(); ++t)
        margins.push_back({group.label, baseline.label, static_cast<int>(t),
                           gc.mean[t] - bc.mean[t]});
    }
  }
  report::emit_margins_csv(margins, out_dir + "/margins.csv");

  // 2-D projections of each group's initial pools; skipped when the dataset
  // cannot be rebuilt from the recorded config (e.g. moved files)
  nlohmann::json meta;
  meta["schema"] = "poolseed.report.v1";
  meta["projection_method"] = "pca2";
  meta["groups"] = nlohmann::json::array();
  for (const auto& group : groups) {
    nlohmann::json g;
    g["fingerprint"] = group.fingerprint;
    g["label"] = group.label;
    g["records"] = group.records.size();
    meta["groups"].push_back(g);
    try {
      const config::PreparedData data = config::prepare_data(group.config);
      std::vector<report::ProjectionRow> rows;
      for (const auto& record : group.records) {
        const Matrix coords = report::project_2d(data.table.features, record.initial_indices);
        for (int i = 0; i < coords.rows; ++i)
          rows.push_back({record.seed, record.initial_indices[i], coords(i, 0), coords(i, 1)});
      }
      report::emit_projection_csv(rows, out_dir + "/projection_" + group.fingerprint + ".csv");
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: no projection for %s: %s\n", group.fingerprint.c_str(),
                   e.what());
    }
  }
  atomic_write(out_dir + "/meta.json", meta.dump(2) + "\n");
}

}  // namespace poolseed::runner
