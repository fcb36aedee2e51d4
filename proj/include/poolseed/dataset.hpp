#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poolseed/matrix.hpp"

namespace poolseed {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;
};

// Feature table with integer class labels. Immutable after construction and
// safe to share across concurrent trials.
struct DataTable {
  Matrix features;  // rows = samples, cols = flattened feature values
  std::vector<int> labels;
  std::optional<ImageShape> image_shape;
  int class_count = 0;

  int rows() const { return features.rows; }
  int cols() const { return features.cols; }
  void validate() const;  // throws on any invariant violation
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
};

// IDX binary format, big-endian; magic 0x00000803 (ubyte images, 3 dims) and
// 0x00000801 (ubyte labels, 1 dim). Pixels are scaled by 1/255 on load.
DataTable load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const DataTable& table, const std::string& images_path, const std::string& labels_path);

// CSV with a header row; the last column is the integer label.
DataTable load_csv(const std::string& path);
void save_csv(const DataTable& table, const std::string& path);

DataTable generate_two_gaussians(int n, std::array<double, 2> mean_a, std::array<double, 2> mean_b,
                                 double sigma, std::uint64_t seed);

// Procedural byte-quantized image classes (oriented gratings plus a class
// anchor blob); stands in for digit corpora when none is on disk.
DataTable generate_synthetic_digits(int n, int classes, int side, std::uint64_t seed);

SplitIndices split(const DataTable& table, double val_fraction, double test_fraction,
                   std::uint64_t seed);

// Keeps round(n0 * mu^i) samples of class i, mu = factor^(-1/(K-1)).
DataTable apply_longtail(const DataTable& table, double imbalance_factor, std::uint64_t seed);

// (x - mean) / stddev with caller-supplied constants.
DataTable normalize(const DataTable& table, double mean, double stddev);

DataTable stratified_subset(const DataTable& table, int n, std::uint64_t seed);
DataTable take_rows(const DataTable& table, const std::vector<int>& rows);

std::uint64_t dataset_fingerprint(const DataTable& table);

}  // namespace poolseed
