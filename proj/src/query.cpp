#include "poolseed/query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

namespace poolseed::query {

namespace {

void check_distribution_rows(const Matrix& probs) {
  for (int i = 0; i < probs.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < probs.cols; ++j) {
      const double p = probs(i, j);
      require(std::isfinite(p) && p >= 0.0, Err::NotADistribution,
              "negative or non-finite probability");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-6, Err::NotADistribution,
            "row " + std::to_string(i) + " sums to " + std::to_string(sum));
  }
}

double row_entropy(const double* p, int k) {
  double h = 0.0;
  for (int j = 0; j < k; ++j)
    if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
  return h;
}

}  // namespace

std::vector<double> uncertainty_scores(const Matrix& probs, UncertaintyKind kind) {
  check_distribution_rows(probs);
  std::vector<double> scores(probs.rows);
  for (int i = 0; i < probs.rows; ++i) {
    const double* p = probs.row(i);
    switch (kind) {
      case UncertaintyKind::LeastConfidence: {
        double top = p[0];
        for (int j = 1; j < probs.cols; ++j) top = std::max(top, p[j]);
        scores[i] = 1.0 - top;
        break;
      }
      case UncertaintyKind::MaxEntropy:
        scores[i] = row_entropy(p, probs.cols);
        break;
      case UncertaintyKind::MinMargin: {
        double top = -1.0, second = -1.0;
        for (int j = 0; j < probs.cols; ++j) {
          if (p[j] > top) {
            second = top;
            top = p[j];
          } else if (p[j] > second) {
            second = p[j];
          }
        }
        if (probs.cols < 2) second = 0.0;
        scores[i] = -(top - second);
        break;
      }
    }
  }
  return scores;
}

std::vector<double> entropy_of_mean(const std::vector<Matrix>& passes) {
  require(!passes.empty(), Err::EmptyInput, "no prediction passes");
  Matrix mean = passes.front();
  for (std::size_t t = 1; t < passes.size(); ++t)
    for (std::size_t j = 0; j < mean.data.size(); ++j) mean.data[j] += passes[t].data[j];
  for (double& v : mean.data) v /= passes.size();
  std::vector<double> out(mean.rows);
  for (int i = 0; i < mean.rows; ++i) out[i] = row_entropy(mean.row(i), mean.cols);
  return out;
}

std::vector<double> bald_from_passes(const std::vector<Matrix>& passes) {
  std::vector<double> mutual = entropy_of_mean(passes);
  for (int i = 0; i < passes.front().rows; ++i) {
    double mean_h = 0.0;
    for (const Matrix& p : passes) mean_h += row_entropy(p.row(i), p.cols);
    mutual[i] -= mean_h / passes.size();
  }
  return mutual;
}

std::vector<double> dbal_scores(const nn::TrainedModel& model, const Matrix& inputs, int passes,
                                DbalKind kind, std::uint64_t seed) {
  require(model.spec.has_dropout(), Err::NoDropout, "model has no active dropout layer");
  require(passes >= 1, Err::InvalidArgument, "need at least one pass");
  const auto probs = nn::mc_dropout_passes(model, inputs, passes, seed);
  return kind == DbalKind::Entropy ? entropy_of_mean(probs) : bald_from_passes(probs);
}

std::vector<int> coreset_greedy(const Matrix& embeddings, const std::vector<int>& labeled,
                                const std::vector<int>& candidates, int k) {
  require(k >= 0, Err::InvalidArgument, "k must be >= 0");
  require(k <= static_cast<int>(candidates.size()), Err::BudgetExceedsPool,
          "k exceeds candidate count");
  const int d = embeddings.cols;
  for (int i : labeled)
    require(i >= 0 && i < embeddings.rows, Err::IndexOutOfRange, "labeled index out of range");
  for (int i : candidates)
    require(i >= 0 && i < embeddings.rows, Err::IndexOutOfRange, "candidate index out of range");

  // min squared distance from each candidate to the covered set
  std::vector<double> min_d2(candidates.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (int l : labeled)
      min_d2[i] = std::min(min_d2[i],
                           squared_distance(embeddings.row(candidates[i]), embeddings.row(l), d));

  std::vector<bool> taken(candidates.size(), false);
  std::vector<int> out;
  out.reserve(k);

  if (labeled.empty() && k > 0) {
    std::vector<double> centroid(d, 0.0);
    for (int c : candidates) {
      const double* e = embeddings.row(c);
      for (int j = 0; j < d; ++j) centroid[j] += e[j];
    }
    for (double& v : centroid) v /= candidates.size();
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double dist = squared_distance(embeddings.row(candidates[i]), centroid.data(), d);
      if (dist > best_d || (dist == best_d && candidates[i] < candidates[best])) {
        best_d = dist;
        best = i;
      }
    }
    taken[best] = true;
    out.push_back(candidates[best]);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      min_d2[i] = std::min(min_d2[i], squared_distance(embeddings.row(candidates[i]),
                                                       embeddings.row(candidates[best]), d));
  }

  while (static_cast<int>(out.size()) < k) {
    std::size_t best = candidates.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i]) continue;
      if (min_d2[i] > best_d || (min_d2[i] == best_d && candidates[i] < candidates[best])) {
        best_d = min_d2[i];
        best = i;
      }
    }
    taken[best] = true;
    out.push_back(candidates[best]);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      min_d2[i] = std::min(min_d2[i], squared_distance(embeddings.row(candidates[i]),
                                                       embeddings.row(candidates[best]), d));
  }
  return out;
}

std::vector<double> ensemble_scores(const std::vector<nn::TrainedModel>& models,
                                    const Matrix& inputs, EnsembleKind kind) {
  require(models.size() >= 2, Err::InvalidArgument, "ensemble needs at least 2 models");
  const int classes = models.front().spec.output_dim();
  for (const auto& m : models)
    require(m.spec.output_dim() == classes, Err::HeterogeneousEnsemble,
            "ensemble members disagree on class count");

  std::vector<Matrix> probs;
  probs.reserve(models.size());
  for (const auto& m : models) probs.push_back(nn::predict_proba(m, inputs));

  if (kind == EnsembleKind::VariationRatio) {
    std::vector<double> scores(inputs.rows, 0.0);
    for (int i = 0; i < inputs.rows; ++i) {
      std::vector<int> votes(classes, 0);
      for (const Matrix& p : probs) {
        int arg = 0;
        for (int j = 1; j < classes; ++j)
          if (p(i, j) > p(i, arg)) arg = j;
        ++votes[arg];
      }
      const int modal = *std::max_element(votes.begin(), votes.end());
      scores[i] = 1.0 - double(modal) / models.size();
    }
    return scores;
  }

  Matrix mean(inputs.rows, classes);
  for (const Matrix& p : probs)
    for (std::size_t j = 0; j < mean.data.size(); ++j) mean.data[j] += p.data[j];
  for (double& v : mean.data) v /= models.size();
  // renormalize against accumulated rounding before scoring
  for (int i = 0; i < mean.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < classes; ++j) sum += mean(i, j);
    for (int j = 0; j < classes; ++j) mean(i, j) /= sum;
  }
  switch (kind) {
    case EnsembleKind::LeastConfidence:
      return uncertainty_scores(mean, UncertaintyKind::LeastConfidence);
    case EnsembleKind::MaxEntropy:
      return uncertainty_scores(mean, UncertaintyKind::MaxEntropy);
    case EnsembleKind::MinMargin:
      return uncertainty_scores(mean, UncertaintyKind::MinMargin);
    default:
      break;
  }
  fail(Err::InvalidArgument, "unknown ensemble kind");
}

std::vector<int> top_k(const std::vector<double>& scores, const std::vector<int>& candidates,
                       int k) {
  require(scores.size() == candidates.size(), Err::DimensionMismatch,
          "score count != candidate count");
  require(k >= 0 && k <= static_cast<int>(candidates.size()), Err::BudgetExceedsPool,
          "k exceeds candidate count");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a] < candidates[b];
  });
  std::vector<int> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(candidates[order[i]]);
  return out;
}

std::string QueryStrategy::name() const {
  switch (kind) {
    case QueryKind::Random: return "random";
    case QueryKind::LeastConfidence: return "lc";
    case QueryKind::MaxEntropy: return "me";
    case QueryKind::MinMargin: return "mm";
    case QueryKind::DbalEntropy: return "dbal_entropy(T=" + std::to_string(mc_passes) + ")";
    case QueryKind::DbalBald: return "dbal_bald(T=" + std::to_string(mc_passes) + ")";
    case QueryKind::CoresetGreedy: return "coreset";
    case QueryKind::EnsVarR: return "ens_varr(M=" + std::to_string(ensemble_size) + ")";
    case QueryKind::EnsLC: return "ens_lc(M=" + std::to_string(ensemble_size) + ")";
    case QueryKind::EnsME: return "ens_me(M=" + std::to_string(ensemble_size) + ")";
    case QueryKind::EnsMM: return "ens_mm(M=" + std::to_string(ensemble_size) + ")";
  }
  return "?";
}

bool QueryStrategy::needs_ensemble() const {
  return kind == QueryKind::EnsVarR || kind == QueryKind::EnsLC || kind == QueryKind::EnsME ||
         kind == QueryKind::EnsMM;
}

void QueryStrategy::validate() const {
  require(mc_passes >= 1, Err::ConfigInvalid, "mc_passes must be >= 1");
  if (needs_ensemble())
    require(ensemble_size >= 2, Err::ConfigInvalid, "ensemble_size must be >= 2");
}

}  // namespace poolseed::query
