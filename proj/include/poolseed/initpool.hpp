#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poolseed/clustering.hpp"
#include "poolseed/dataset.hpp"
#include "poolseed/pretext.hpp"

namespace poolseed::initpool {

enum class StrategyKind { Random, SslTopK, SslBinned, ClusterEqual, ClusterProportional };
enum class ClusterSpace { Raw, PretextEmbedding };
enum class WithinCluster { Uniform, Central };

struct InitialPoolStrategy {
  StrategyKind kind = StrategyKind::Random;
  pretext::PretextTask task;  // ssl_* kinds and the embedding cluster space
  int n_bins = 5;             // ssl_binned
  ClusterSpace space = ClusterSpace::Raw;
  WithinCluster within = WithinCluster::Uniform;
  int cluster_k = 0;  // 0 = dataset class count
  cluster::KmeansParams kmeans;
  pretext::PretextTrainConfig pretext_config;

  std::string name() const;
  bool needs_pretext_model() const;
};

// Selects exactly `budget` distinct dataset indices from the pool; trains the
// pretext model internally when the strategy calls for one.
std::vector<int> select_initial_pool(const InitialPoolStrategy& strategy, const DataTable& table,
                                     const std::vector<int>& unlabeled_indices, int budget,
                                     std::uint64_t seed);

// The budget highest-scored indices, ties by ascending index.
std::vector<int> ssl_topk_select(const pretext::ScoreVector& scores, int budget);

// Sort descending, partition into n_bins contiguous bins (earlier bins take
// the extra element), then per-bin quotas of floor(B/n) plus one for the
// first B mod n bins: highest-scored from the top n-1 bins, lowest-scored
// from the last bin.
std::vector<int> ssl_binned_select(const pretext::ScoreVector& scores, int budget, int n_bins);

// Per-cluster picks honoring `quotas`; uniform draws or centroid-nearest
// points. Returns pool positions (0-based into the assignment).
std::vector<int> cluster_select(const cluster::ClusterAssignment& assignment, const Matrix& points,
                                const std::vector<int>& quotas, WithinCluster within,
                                std::uint64_t seed);

void save_selection_csv(const std::vector<int>& selected, const std::string& path);

}  // namespace poolseed::initpool
