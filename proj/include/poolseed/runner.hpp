#pragma once

#include <map>
#include <string>
#include <vector>

#include "poolseed/config.hpp"

namespace poolseed::runner {

struct RunOptions {
  int threads = 0;  // 0 = hardware concurrency
  bool force = false;
  bool quiet = false;
};

// Runs one trial per seed and writes <out_dir>/<fingerprint>.jsonl plus a
// volatile timing sidecar. Refuses to overwrite an existing record file for
// the same fingerprint unless force is set.
std::string run_seeds(const config::ExperimentConfig& config, const std::string& out_dir,
                      const RunOptions& options);

struct GridAxis {
  std::string key;                      // dotted config path
  std::vector<nlohmann::json> values;
};

struct SweepResult {
  std::vector<std::string> fingerprints;
  std::vector<std::string> record_files;
};

// Cartesian product of the axes applied to the base config; each cell runs
// all seeds and lands in its own record file. Writes <out_dir>/index.csv.
SweepResult run_sweep(const nlohmann::json& base_config, const std::vector<GridAxis>& grid,
                      const std::string& out_dir, const RunOptions& options);

struct RecordGroup {
  std::string fingerprint;
  std::string label;  // strategy/query summary for plots
  config::ExperimentConfig config;
  std::vector<al::ExperimentRecord> records;
};

struct LoadStats {
  int files = 0;
  int records = 0;
  int skipped_lines = 0;
};

std::vector<RecordGroup> load_records(const std::string& results_dir, LoadStats* stats = nullptr);

// Curves (csv + jsonl + combined svg), pool overlaps between groups sharing
// a dataset, guided-vs-random margins, and 2-D projections of initial pools.
void write_report(const std::vector<RecordGroup>& groups, const std::string& out_dir);

std::string default_results_root();

}  // namespace poolseed::runner
