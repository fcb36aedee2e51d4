#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poolseed/matrix.hpp"

namespace poolseed::cluster {

struct ClusterAssignment {
  int k = 0;
  std::vector<int> assignment;  // cluster id per pool position
  Matrix centroids;             // k x d
  double inertia = 0.0;
  std::vector<double> inertia_history;  // one entry per Lloyd assignment step

  std::vector<int> sizes() const;
};

struct KmeansParams {
  int max_iters = 300;
  double tol = 1e-6;
};

// k-means++ seeding followed by Lloyd iterations; empty clusters are reseeded
// to the point farthest from its current centroid. Deterministic given seed.
ClusterAssignment kmeans(const Matrix& points, int k, std::uint64_t seed, KmeansParams params = {});

enum class QuotaMode { Equal, Proportional };

// Per-cluster sampling counts that sum to exactly `budget` and never exceed
// cluster sizes. Equal mode: floor(B/K) each, remainder one-by-one to larger
// clusters first (ties by id). Proportional mode: floor(|C_j|*B/N) each,
// remainder by largest fractional part (ties by id). Overflow from capped
// clusters is redistributed by the same remainder rule over non-full ones.
std::vector<int> cluster_quotas(const std::vector<int>& cluster_sizes, int budget, QuotaMode mode);
std::vector<int> cluster_quotas(const ClusterAssignment& assignment, int budget, QuotaMode mode);

void save_assignment_csv(const ClusterAssignment& assignment, const std::vector<int>& pool_indices,
                         const std::string& path);

}  // namespace poolseed::cluster
