#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "poolseed/alloop.hpp"
#include "poolseed/dataset.hpp"

namespace poolseed::config {

// Full experiment description. Parsed strictly from JSON: unknown keys are
// rejected with their path so a typo cannot silently change an experiment.
struct DatasetConfig {
  std::string kind = "two_gaussians";  // idx | csv | two_gaussians | synth_digits
  std::string images;                  // idx
  std::string labels_path;             // idx
  std::string csv;                     // csv
  int n = 500;                         // generators
  std::array<double, 2> mean_a{-2.0, 0.0};
  std::array<double, 2> mean_b{2.0, 0.0};
  double sigma = 1.0;
  int classes = 10;  // synth_digits
  int side = 28;     // synth_digits
  std::uint64_t seed = 1;
  int subset = 0;               // 0 = keep all rows (stratified otherwise)
  double longtail_factor = 1.0; // 1 = balanced
  bool normalize = false;
  double normalize_mean = 0.0;
  double normalize_std = 1.0;
};

struct SplitConfig {
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 11;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  SplitConfig split;
  al::ModelConfig model;
  initpool::InitialPoolStrategy initial;
  nn::AdamConfig pretext_adam{5e-4, 5e-4, 0.9, 0.999, 1e-8, 64, 12, 0};
  query::QueryStrategy query;
  double initial_fraction = 0.05;
  double cycle_fraction = 0.10;
  int cycle_count = 3;
  bool debug_scores = false;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  // Canonical JSON with sorted keys and the seed list excluded; identical
  // experiment settings fingerprint identically regardless of seeds.
  nlohmann::json canonical() const;
  std::string fingerprint() const;

  al::ALConfig al_config() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

// Dotted-path override ("query.kind", "initial.n_bins"); the path must
// already exist in the base JSON.
void apply_override(nlohmann::json& j, const std::string& dotted_key,
                    const nlohmann::json& value);

// Materializes the dataset plus its split per the config.
struct PreparedData {
  DataTable table;
  SplitIndices splits;
};
PreparedData prepare_data(const ExperimentConfig& config);

// Record (de)serialization: one JSON object per line. Wall times are kept in
// a separate volatile key block emitted by the runner, not here.
nlohmann::json record_to_json(const al::ExperimentRecord& record);
al::ExperimentRecord record_from_json(const nlohmann::json& j);

}  // namespace poolseed::config
