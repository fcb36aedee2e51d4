#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poolseed/dataset.hpp"
#include "poolseed/initpool.hpp"
#include "poolseed/nn.hpp"
#include "poolseed/query.hpp"

namespace poolseed::al {

// Disjoint labeled/unlabeled bookkeeping over a fixed train split.
struct PoolState {
  std::vector<int> labeled;    // acquisition order
  std::vector<int> unlabeled;  // ascending
  std::vector<std::vector<int>> history;  // newly labeled per acquisition

  static PoolState make(std::vector<int> train_indices);
  void acquire(const std::vector<int>& selected);
  void check() const;  // disjointness, conservation, history consistency

 private:
  std::size_t total_ = 0;
};

// Ground-truth labeler; charges one annotation per index labeled.
class Oracle {
 public:
  explicit Oracle(const DataTable& table) : table_(table) {}
  std::vector<int> label(const std::vector<int>& indices);
  long annotations() const { return annotations_; }

 private:
  const DataTable& table_;
  long annotations_ = 0;
};

struct ModelConfig {
  std::vector<int> hidden{256, 128};
  double dropout = 0.25;
  nn::AdamConfig adam;
};

struct ALConfig {
  double initial_fraction = 0.05;
  double cycle_fraction = 0.10;
  int cycle_count = 3;
  initpool::InitialPoolStrategy initial_strategy;
  query::QueryStrategy query_strategy;
  ModelConfig model;
  bool debug_scores = false;
  std::string debug_dir;

  void validate(std::size_t train_size) const;
};

struct ExperimentRecord {
  std::string fingerprint;  // config fingerprint, set by the runner
  std::uint64_t seed = 0;
  std::uint64_t dataset_fp = 0;
  std::vector<int> labeled_sizes;                // cycle_count + 1 entries
  std::vector<double> test_accuracy;             // cycle_count + 1 entries
  std::vector<double> val_accuracy;              // NaN entries when no val split
  std::vector<int> initial_indices;
  std::vector<std::vector<int>> cycle_indices;   // newly labeled per cycle
  long annotations = 0;
  std::vector<double> wall_time_s;  // per training stage; not part of the canonical serialization

  std::vector<int> labeled_at(int cycle) const;  // cumulative snapshot, cycle 0 = initial pool
};

int round_half_up(double x);

// One full sample-label-train trial. Seed streams (derive_seed tags on the
// trial seed): 0xA* initial selection, (3,t) target training at cycle t,
// (4,t) query sampling, (5,t*64+m) ensemble member m.
ExperimentRecord run_trial(const DataTable& table, const SplitIndices& splits,
                           const ALConfig& config, std::uint64_t seed);

}  // namespace poolseed::al
