#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poolseed/matrix.hpp"
#include "poolseed/nn.hpp"

namespace poolseed::query {

enum class UncertaintyKind { LeastConfidence, MaxEntropy, MinMargin };

// Higher score = more uncertain, uniformly across kinds (margin is negated).
std::vector<double> uncertainty_scores(const Matrix& probs, UncertaintyKind kind);

enum class DbalKind { Entropy, Bald };

// Entropy of the mean MC-dropout prediction; rows aligned with the passes.
std::vector<double> entropy_of_mean(const std::vector<Matrix>& passes);
// Mutual information: entropy of mean minus mean of per-pass entropies.
std::vector<double> bald_from_passes(const std::vector<Matrix>& passes);

std::vector<double> dbal_scores(const nn::TrainedModel& model, const Matrix& inputs, int passes,
                                DbalKind kind, std::uint64_t seed);

// Greedy k-center over embedding rows; each pick maximizes the distance to
// the nearest covered point (labeled plus already selected), ties by index.
// With an empty labeled set the first pick is the candidate farthest from
// the candidate centroid.
std::vector<int> coreset_greedy(const Matrix& embeddings, const std::vector<int>& labeled,
                                const std::vector<int>& candidates, int k);

enum class EnsembleKind { VariationRatio, LeastConfidence, MaxEntropy, MinMargin };

std::vector<double> ensemble_scores(const std::vector<nn::TrainedModel>& models,
                                    const Matrix& inputs, EnsembleKind kind);

// k highest-scored candidates, ties by ascending candidate index.
std::vector<int> top_k(const std::vector<double>& scores, const std::vector<int>& candidates, int k);

enum class QueryKind {
  Random,
  LeastConfidence,
  MaxEntropy,
  MinMargin,
  DbalEntropy,
  DbalBald,
  CoresetGreedy,
  EnsVarR,
  EnsLC,
  EnsME,
  EnsMM,
};

struct QueryStrategy {
  QueryKind kind = QueryKind::Random;
  int mc_passes = 25;    // dbal variants
  int ensemble_size = 3; // ens variants, total members including the primary

  std::string name() const;
  bool needs_ensemble() const;
  void validate() const;
};

}  // namespace poolseed::query
