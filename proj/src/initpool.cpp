#include "poolseed/initpool.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

namespace poolseed::initpool {

namespace {

// Pretext scores are a pure function of (dataset, task, pool, training
// config, seed); trials sharing a seed across query strategies reuse them.
std::uint64_t score_cache_key(const pretext::PretextTask& task, const DataTable& table,
                              const std::vector<int>& pool, const nn::AdamConfig& adam,
                              std::uint64_t seed) {
  std::ostringstream os;
  os << task.name() << '|' << adam.learning_rate << ',' << adam.weight_decay << ',' << adam.beta1
     << ',' << adam.beta2 << ',' << adam.epsilon << ',' << adam.batch_size << ','
     << adam.max_epochs << ',' << adam.early_stop_patience;
  std::uint64_t h = fnv1a(os.str());
  h = fnv1a(pool.data(), pool.size() * sizeof(int), h);
  const std::uint64_t dfp = dataset_fingerprint(table);
  h = fnv1a(&dfp, sizeof(dfp), h);
  return fnv1a(&seed, sizeof(seed), h);
}

pretext::ScoreVector cached_pool_scores(const pretext::PretextTask& task, const DataTable& table,
                                        const std::vector<int>& pool,
                                        const pretext::PretextTrainConfig& config,
                                        std::uint64_t seed) {
  static std::mutex mutex;
  static std::map<std::uint64_t, pretext::ScoreVector> cache;
  const std::uint64_t key = score_cache_key(task, table, pool, config.adam, seed);
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const auto model = pretext::train_pretext(task, table, pool, config, seed);
  auto scores = pretext::score_pool(task, model, table, pool);
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, scores);
  return scores;
}

// positions 0..n-1 sorted by score descending, ties by ascending position of
// the original index (indices themselves break ties, not positions)
std::vector<std::size_t> descending_order(const pretext::ScoreVector& scores) {
  std::vector<std::size_t> order(scores.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    return scores.indices[a] < scores.indices[b];
  });
  return order;
}

}  // namespace

std::string InitialPoolStrategy::name() const {
  switch (kind) {
    case StrategyKind::Random: return "random";
    case StrategyKind::SslTopK: return "ssl_topk[" + task.name() + "]";
    case StrategyKind::SslBinned:
      return "ssl_binned[" + task.name() + ",n=" + std::to_string(n_bins) + "]";
    case StrategyKind::ClusterEqual:
      return std::string("cluster_equal[") + (space == ClusterSpace::Raw ? "raw" : "embedding") + "]";
    case StrategyKind::ClusterProportional:
      return std::string("cluster_proportional[") +
             (space == ClusterSpace::Raw ? "raw" : "embedding") + "]";
  }
  return "?";
}

bool InitialPoolStrategy::needs_pretext_model() const {
  if (kind == StrategyKind::SslTopK || kind == StrategyKind::SslBinned) return true;
  if ((kind == StrategyKind::ClusterEqual || kind == StrategyKind::ClusterProportional) &&
      space == ClusterSpace::PretextEmbedding)
    return true;
  return false;
}

std::vector<int> ssl_topk_select(const pretext::ScoreVector& scores, int budget) {
  require(budget >= 1, Err::InvalidArgument, "budget must be >= 1");
  require(budget <= static_cast<int>(scores.scores.size()), Err::BudgetExceedsPool,
          "budget exceeds scored pool");
  const auto order = descending_order(scores);
  std::vector<int> out;
  out.reserve(budget);
  for (int i = 0; i < budget; ++i) out.push_back(scores.indices[order[i]]);
  return out;
}

std::vector<int> ssl_binned_select(const pretext::ScoreVector& scores, int budget, int n_bins) {
  const int n = static_cast<int>(scores.scores.size());
  require(budget >= 1, Err::InvalidArgument, "budget must be >= 1");
  require(budget <= n, Err::BudgetExceedsPool, "budget exceeds scored pool");
  require(n_bins >= 2, Err::TooManyBins, "n_bins must be >= 2");
  require(n_bins <= n, Err::TooManyBins, "n_bins exceeds scored pool");

  const auto order = descending_order(scores);

  // contiguous bins over the sorted list; first n mod n_bins bins one larger
  const int bin_base = n / n_bins;
  const int bin_extra = n % n_bins;
  // per-bin take counts; remainder one-per-bin starting from bin 0
  const int take_base = budget / n_bins;
  const int take_extra = budget % n_bins;

  std::vector<int> out;
  out.reserve(budget);
  int start = 0;
  for (int b = 0; b < n_bins; ++b) {
    const int bin_size = bin_base + (b < bin_extra ? 1 : 0);
    const int take = take_base + (b < take_extra ? 1 : 0);
    if (b < n_bins - 1) {
      for (int i = 0; i < take; ++i) out.push_back(scores.indices[order[start + i]]);
    } else {
      // last bin: lowest-scored members, i.e. the tail of the descending sort
      for (int i = 0; i < take; ++i)
        out.push_back(scores.indices[order[start + bin_size - 1 - i]]);
    }
    start += bin_size;
  }
  return out;
}

std::vector<int> cluster_select(const cluster::ClusterAssignment& assignment, const Matrix& points,
                                const std::vector<int>& quotas, WithinCluster within,
                                std::uint64_t seed) {
  require(static_cast<int>(quotas.size()) == assignment.k, Err::DimensionMismatch,
          "quota count != cluster count");
  require(points.rows == static_cast<int>(assignment.assignment.size()), Err::DimensionMismatch,
          "point count != assignment count");

  std::vector<std::vector<int>> members(assignment.k);
  for (std::size_t i = 0; i < assignment.assignment.size(); ++i)
    members[assignment.assignment[i]].push_back(static_cast<int>(i));

  std::vector<int> out;
  for (int c = 0; c < assignment.k; ++c) {
    require(quotas[c] <= static_cast<int>(members[c].size()), Err::QuotaExceedsCluster,
            "quota " + std::to_string(quotas[c]) + " exceeds cluster " + std::to_string(c) +
                " size " + std::to_string(members[c].size()));
    if (quotas[c] == 0) continue;
    if (within == WithinCluster::Uniform) {
      Rng rng(derive_seed(seed, 0xC1, static_cast<std::uint64_t>(c)));
      auto picks = rng.sample(members[c], static_cast<std::size_t>(quotas[c]));
      out.insert(out.end(), picks.begin(), picks.end());
    } else {
      auto by_distance = members[c];
      std::sort(by_distance.begin(), by_distance.end(), [&](int a, int b) {
        const double da = squared_distance(points.row(a), assignment.centroids.row(c), points.cols);
        const double db = squared_distance(points.row(b), assignment.centroids.row(c), points.cols);
        if (da != db) return da < db;
        return a < b;
      });
      out.insert(out.end(), by_distance.begin(), by_distance.begin() + quotas[c]);
    }
  }
  return out;
}

std::vector<int> select_initial_pool(const InitialPoolStrategy& strategy, const DataTable& table,
                                     const std::vector<int>& unlabeled_indices, int budget,
                                     std::uint64_t seed) {
  const int pool = static_cast<int>(unlabeled_indices.size());
  require(budget >= 1, Err::InvalidArgument, "budget must be >= 1");
  require(budget <= pool, Err::BudgetExceedsPool,
          "budget " + std::to_string(budget) + " exceeds pool " + std::to_string(pool));

  switch (strategy.kind) {
    case StrategyKind::Random: {
      Rng rng(derive_seed(seed, 0xA0));
      return rng.sample(unlabeled_indices, static_cast<std::size_t>(budget));
    }
    case StrategyKind::SslTopK:
    case StrategyKind::SslBinned: {
      const auto scores = cached_pool_scores(strategy.task, table, unlabeled_indices,
                                             strategy.pretext_config, derive_seed(seed, 0xA1));
      if (strategy.kind == StrategyKind::SslTopK) return ssl_topk_select(scores, budget);
      return ssl_binned_select(scores, budget, strategy.n_bins);
    }
    case StrategyKind::ClusterEqual:
    case StrategyKind::ClusterProportional: {
      Matrix points;
      if (strategy.space == ClusterSpace::Raw) {
        points = gather_rows(table.features, unlabeled_indices);
      } else {
        const auto model = pretext::train_pretext(strategy.task, table, unlabeled_indices,
                                                  strategy.pretext_config, derive_seed(seed, 0xA1));
        points = nn::embed(model, gather_rows(table.features, unlabeled_indices));
      }
      const int k = strategy.cluster_k > 0 ? strategy.cluster_k : table.class_count;
      const auto assignment = cluster::kmeans(points, k, derive_seed(seed, 0xA2), strategy.kmeans);
      const auto mode = strategy.kind == StrategyKind::ClusterEqual
                            ? cluster::QuotaMode::Equal
                            : cluster::QuotaMode::Proportional;
      const auto quotas = cluster::cluster_quotas(assignment, budget, mode);
      const auto positions =
          cluster_select(assignment, points, quotas, strategy.within, derive_seed(seed, 0xA3));
      std::vector<int> out;
      out.reserve(positions.size());
      for (int p : positions) out.push_back(unlabeled_indices[p]);
      return out;
    }
  }
  fail(Err::InvalidArgument, "unknown initial pool strategy");
}

void save_selection_csv(const std::vector<int>& selected, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << "order,index\n";
  for (std::size_t i = 0; i < selected.size(); ++i) out << i << "," << selected[i] << "\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

}  // namespace poolseed::initpool
