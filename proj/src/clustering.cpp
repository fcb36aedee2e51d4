#include "poolseed/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

namespace poolseed::cluster {

namespace {

// assignment + inertia for fixed centroids; ties to the lowest cluster id
double assign_points(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment) {
  const int n = points.rows, k = centroids.rows, d = points.cols;
  double inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* p = points.row(i);
    int best = 0;
    double best_d = squared_distance(p, centroids.row(0), d);
    for (int c = 1; c < k; ++c) {
      const double dist = squared_distance(p, centroids.row(c), d);
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    assignment[i] = best;
    inertia += best_d;
  }
  return inertia;
}

Matrix kmeanspp_seed(const Matrix& points, int k, Rng& rng) {
  const int n = points.rows, d = points.cols;
  Matrix centroids(k, d);
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  int first = static_cast<int>(rng.index(n));
  std::memcpy(centroids.row(0), points.row(first), sizeof(double) * d);
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      dist2[i] = std::min(dist2[i], squared_distance(points.row(i), centroids.row(c - 1), d));
      total += dist2[i];
    }
    int chosen;
    if (total <= 0.0) {
      chosen = static_cast<int>(rng.index(n));  // all points coincide with centroids
    } else {
      const double target = rng.real() * total;
      double acc = 0.0;
      chosen = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc > target) {
          chosen = i;
          break;
        }
      }
    }
    std::memcpy(centroids.row(c), points.row(chosen), sizeof(double) * d);
  }
  return centroids;
}

}  // namespace

std::vector<int> ClusterAssignment::sizes() const {
  std::vector<int> out(k, 0);
  for (int a : assignment) ++out[a];
  return out;
}

ClusterAssignment kmeans(const Matrix& points, int k, std::uint64_t seed, KmeansParams params) {
  require(points.rows >= 1, Err::EmptyInput, "no points to cluster");
  require(k >= 1, Err::InvalidArgument, "k must be >= 1");
  require(k <= points.rows, Err::KExceedsPoints,
          "k=" + std::to_string(k) + " exceeds " + std::to_string(points.rows) + " points");

  const int n = points.rows, d = points.cols;
  Rng rng(seed);
  ClusterAssignment result;
  result.k = k;
  result.centroids = kmeanspp_seed(points, k, rng);
  result.assignment.assign(n, 0);

  for (int iter = 0; iter < params.max_iters; ++iter) {
    result.inertia = assign_points(points, result.centroids, result.assignment);
    result.inertia_history.push_back(result.inertia);

    Matrix next(k, d);
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      const int c = result.assignment[i];
      ++counts[c];
      const double* p = points.row(i);
      double* m = next.row(c);
      for (int j = 0; j < d; ++j) m[j] += p[j];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        double* m = next.row(c);
        for (int j = 0; j < d; ++j) m[j] /= counts[c];
      } else {
        // reseed to the point farthest from its current centroid
        int farthest = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double dist =
              squared_distance(points.row(i), result.centroids.row(result.assignment[i]), d);
          if (dist > far_d) {
            far_d = dist;
            farthest = i;
          }
        }
        std::memcpy(next.row(c), points.row(farthest), sizeof(double) * d);
      }
    }

    double shift = 0.0;
    for (int c = 0; c < k; ++c)
      shift = std::max(shift, squared_distance(next.row(c), result.centroids.row(c), d));
    result.centroids = std::move(next);
    if (std::sqrt(shift) < params.tol) break;
  }
  result.inertia = assign_points(points, result.centroids, result.assignment);
  result.inertia_history.push_back(result.inertia);
  return result;
}

std::vector<int> cluster_quotas(const std::vector<int>& cluster_sizes, int budget, QuotaMode mode) {
  const int k = static_cast<int>(cluster_sizes.size());
  require(k >= 1, Err::EmptyInput, "no clusters");
  const long pool = std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), 0L);
  require(budget >= 0, Err::InvalidArgument, "budget must be >= 0");
  require(budget <= pool, Err::BudgetExceedsPool,
          "budget " + std::to_string(budget) + " exceeds pool " + std::to_string(pool));

  std::vector<int> quota(k, 0);
  int assigned = 0;
  // remainder order: by mode-specific key, ties by ascending cluster id
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);

  if (mode == QuotaMode::Equal) {
    const int base = budget / k;
    for (int c = 0; c < k; ++c) {
      quota[c] = std::min(base, cluster_sizes[c]);
      assigned += quota[c];
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return cluster_sizes[a] > cluster_sizes[b]; });
  } else {
    std::vector<double> frac(k, 0.0);
    for (int c = 0; c < k; ++c) {
      const double exact = pool > 0 ? double(cluster_sizes[c]) * budget / double(pool) : 0.0;
      quota[c] = std::min(static_cast<int>(std::floor(exact)), cluster_sizes[c]);
      frac[c] = exact - std::floor(exact);
      assigned += quota[c];
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  }

  // one unit per eligible cluster per pass, cycling until the budget is met
  while (assigned < budget) {
    bool progressed = false;
    for (int c : order) {
      if (assigned == budget) break;
      if (quota[c] < cluster_sizes[c]) {
        ++quota[c];
        ++assigned;
        progressed = true;
      }
    }
    require(progressed, Err::BudgetExceedsPool, "quota redistribution stalled");
  }
  return quota;
}

std::vector<int> cluster_quotas(const ClusterAssignment& assignment, int budget, QuotaMode mode) {
  return cluster_quotas(assignment.sizes(), budget, mode);
}

void save_assignment_csv(const ClusterAssignment& assignment, const std::vector<int>& pool_indices,
                         const std::string& path) {
  require(pool_indices.size() == assignment.assignment.size(), Err::DimensionMismatch,
          "pool index count != assignment count");
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << "index,cluster_id\n";
  for (std::size_t i = 0; i < pool_indices.size(); ++i)
    out << pool_indices[i] << "," << assignment.assignment[i] << "\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

}  // namespace poolseed::cluster
