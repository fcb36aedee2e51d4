#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poolseed/alloop.hpp"
#include "poolseed/matrix.hpp"

namespace poolseed::report {

struct Curve {
  std::vector<int> labeled_sizes;
  std::vector<double> mean;
  std::vector<double> stddev;  // sample std, n-1 divisor; 0 when n == 1
  int records = 0;
};

// Per-cycle accuracy mean/std over a group of records sharing one config.
Curve aggregate_curves(const std::vector<al::ExperimentRecord>& group);

// Per-cycle Jaccard overlap of cumulative labeled pools.
std::vector<double> pool_overlap(const al::ExperimentRecord& a, const al::ExperimentRecord& b);

double jaccard(const std::vector<int>& a, const std::vector<int>& b);

// Top-2 principal components of the mean-centered selected rows. Sign fixed
// so each component's largest-magnitude loading is positive.
Matrix project_2d(const Matrix& features, const std::vector<int>& indices);

void emit_curve_csv(const Curve& curve, const std::string& path);
void emit_curve_jsonl(const Curve& curve, const std::string& path);

struct NamedCurve {
  std::string label;
  Curve curve;
};
void emit_curves_svg(const std::vector<NamedCurve>& curves, const std::string& path);

struct OverlapRow {
  std::string group_a;
  std::string group_b;
  std::uint64_t seed = 0;
  int cycle = 0;
  double jaccard = 0.0;
};
void emit_overlaps_csv(const std::vector<OverlapRow>& rows, const std::string& path);
void emit_overlaps_jsonl(const std::vector<OverlapRow>& rows, const std::string& path);

struct ProjectionRow {
  std::uint64_t seed = 0;
  int index = 0;
  double x = 0.0;
  double y = 0.0;
};
void emit_projection_csv(const std::vector<ProjectionRow>& rows, const std::string& path);

struct MarginRow {
  std::string group;
  std::string baseline;
  int cycle = 0;
  double margin = 0.0;  // group mean accuracy minus baseline mean accuracy
};
void emit_margins_csv(const std::vector<MarginRow>& rows, const std::string& path);

std::string format_double(double v);  // shortest round-trip form, stable across runs

}  // namespace poolseed::report
