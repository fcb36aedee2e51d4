#include "poolseed/alloop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_set>

#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

namespace poolseed::al {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

PoolState PoolState::make(std::vector<int> train_indices) {
  std::sort(train_indices.begin(), train_indices.end());
  PoolState state;
  state.unlabeled = std::move(train_indices);
  state.total_ = state.unlabeled.size();
  return state;
}

void PoolState::acquire(const std::vector<int>& selected) {
  std::unordered_set<int> chosen(selected.begin(), selected.end());
  require(chosen.size() == selected.size(), Err::DuplicateIndex, "duplicate index in acquisition");
  std::unordered_set<int> pool(unlabeled.begin(), unlabeled.end());
  for (int i : selected)
    require(pool.count(i) == 1, Err::IndexOutOfRange,
            "index " + std::to_string(i) + " not in unlabeled pool");
  std::vector<int> remaining;
  remaining.reserve(unlabeled.size() - selected.size());
  for (int i : unlabeled)
    if (chosen.count(i) == 0) remaining.push_back(i);
  unlabeled = std::move(remaining);
  labeled.insert(labeled.end(), selected.begin(), selected.end());
  history.push_back(selected);
}

void PoolState::check() const {
  std::set<int> l(labeled.begin(), labeled.end());
  std::set<int> u(unlabeled.begin(), unlabeled.end());
  require(l.size() == labeled.size(), Err::DuplicateIndex, "labeled set has duplicates");
  require(u.size() == unlabeled.size(), Err::DuplicateIndex, "unlabeled set has duplicates");
  for (int i : l)
    require(u.count(i) == 0, Err::ConfigInvalid, "labeled and unlabeled overlap");
  require(l.size() + u.size() == total_, Err::ConfigInvalid, "pool size not conserved");
  std::vector<int> concat;
  for (const auto& batch : history) concat.insert(concat.end(), batch.begin(), batch.end());
  require(concat == labeled, Err::ConfigInvalid, "history does not reconstruct labeled order");
}

std::vector<int> Oracle::label(const std::vector<int>& indices) {
  std::unordered_set<int> seen;
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (int i : indices) {
    require(i >= 0 && i < table_.rows(), Err::IndexOutOfRange,
            "index " + std::to_string(i) + " out of range");
    require(seen.insert(i).second, Err::DuplicateIndex,
            "index " + std::to_string(i) + " labeled twice in one call");
    labels.push_back(table_.labels[i]);
    ++annotations_;
  }
  return labels;
}

void ALConfig::validate(std::size_t train_size) const {
  require(initial_fraction > 0.0 && initial_fraction <= 1.0, Err::ConfigInvalid,
          "initial_fraction must be in (0,1]");
  require(cycle_fraction > 0.0 && cycle_fraction <= 1.0, Err::ConfigInvalid,
          "cycle_fraction must be in (0,1]");
  require(cycle_count >= 0, Err::ConfigInvalid, "cycle_count must be >= 0");
  model.adam.validate();
  query_strategy.validate();
  const long initial = round_half_up(initial_fraction * double(train_size));
  const long per_cycle = round_half_up(cycle_fraction * double(train_size));
  require(initial >= 1, Err::ConfigInvalid, "initial budget rounds to zero");
  require(cycle_count == 0 || per_cycle >= 1, Err::ConfigInvalid, "cycle budget rounds to zero");
  require(initial + cycle_count * per_cycle <= static_cast<long>(train_size), Err::ConfigInvalid,
          "total budget exceeds train split");
}

std::vector<int> ExperimentRecord::labeled_at(int cycle) const {
  std::vector<int> out = initial_indices;
  for (int t = 0; t < cycle && t < static_cast<int>(cycle_indices.size()); ++t)
    out.insert(out.end(), cycle_indices[t].begin(), cycle_indices[t].end());
  return out;
}

namespace {

struct TrialContext {
  const DataTable& table;
  const ALConfig& config;
  Matrix test_inputs;
  std::vector<int> test_labels;
  Matrix val_inputs;
  std::vector<int> val_labels;
};

nn::TrainedModel train_target(const TrialContext& ctx, const std::vector<int>& labeled,
                              std::uint64_t train_seed) {
  const auto spec = nn::mlp_classifier(ctx.table.cols(), ctx.config.model.hidden,
                                       ctx.table.class_count, ctx.config.model.dropout);
  const Matrix inputs = gather_rows(ctx.table.features, labeled);
  std::vector<int> labels;
  labels.reserve(labeled.size());
  for (int i : labeled) labels.push_back(ctx.table.labels[i]);

  std::optional<std::pair<Matrix, nn::Targets>> val;
  if (ctx.val_inputs.rows > 0) val.emplace(ctx.val_inputs, ctx.val_labels);
  return nn::train(spec, inputs, labels, ctx.config.model.adam, val, train_seed);
}

std::vector<int> query_select(const TrialContext& ctx, const nn::TrainedModel& model,
                              const PoolState& pools, int budget, std::uint64_t trial_seed,
                              int cycle) {
  const auto& strat = ctx.config.query_strategy;
  const std::vector<int>& candidates = pools.unlabeled;
  const std::uint64_t query_seed = derive_seed(trial_seed, 4, static_cast<std::uint64_t>(cycle));

  std::vector<double> scores;
  switch (strat.kind) {
    case query::QueryKind::Random: {
      Rng rng(query_seed);
      return rng.sample(candidates, static_cast<std::size_t>(budget));
    }
    case query::QueryKind::LeastConfidence:
    case query::QueryKind::MaxEntropy:
    case query::QueryKind::MinMargin: {
      const Matrix probs = nn::predict_proba(model, gather_rows(ctx.table.features, candidates));
      const auto kind = strat.kind == query::QueryKind::LeastConfidence
                            ? query::UncertaintyKind::LeastConfidence
                        : strat.kind == query::QueryKind::MaxEntropy
                            ? query::UncertaintyKind::MaxEntropy
                            : query::UncertaintyKind::MinMargin;
      scores = query::uncertainty_scores(probs, kind);
      break;
    }
    case query::QueryKind::DbalEntropy:
    case query::QueryKind::DbalBald: {
      const auto kind = strat.kind == query::QueryKind::DbalEntropy ? query::DbalKind::Entropy
                                                                    : query::DbalKind::Bald;
      scores = query::dbal_scores(model, gather_rows(ctx.table.features, candidates),
                                  strat.mc_passes, kind, query_seed);
      break;
    }
    case query::QueryKind::CoresetGreedy: {
      const Matrix embeddings = nn::embed(model, ctx.table.features);
      return query::coreset_greedy(embeddings, pools.labeled, candidates, budget);
    }
    case query::QueryKind::EnsVarR:
    case query::QueryKind::EnsLC:
    case query::QueryKind::EnsME:
    case query::QueryKind::EnsMM: {
      std::vector<nn::TrainedModel> members;
      members.push_back(model);
      for (int m = 1; m < strat.ensemble_size; ++m)
        members.push_back(train_target(
            ctx, pools.labeled,
            derive_seed(trial_seed, 5, static_cast<std::uint64_t>(cycle) * 64 + m)));
      const auto kind = strat.kind == query::QueryKind::EnsVarR ? query::EnsembleKind::VariationRatio
                        : strat.kind == query::QueryKind::EnsLC ? query::EnsembleKind::LeastConfidence
                        : strat.kind == query::QueryKind::EnsME ? query::EnsembleKind::MaxEntropy
                                                                : query::EnsembleKind::MinMargin;
      scores =
          query::ensemble_scores(members, gather_rows(ctx.table.features, candidates), kind);
      break;
    }
  }

  if (ctx.config.debug_scores && !ctx.config.debug_dir.empty()) {
    pretext::ScoreVector dump;
    dump.indices = candidates;
    dump.scores = scores;
    dump.task = strat.name();
    pretext::save_scores_csv(dump, ctx.config.debug_dir + "/scores_cycle" +
                                       std::to_string(cycle) + ".csv");
  }
  return query::top_k(scores, candidates, budget);
}

}  // namespace

ExperimentRecord run_trial(const DataTable& table, const SplitIndices& splits,
                           const ALConfig& config, std::uint64_t seed) {
  config.validate(splits.train.size());
  require(!splits.test.empty(), Err::ConfigInvalid, "test split is empty");

  TrialContext ctx{table, config,
                   gather_rows(table.features, splits.test),
                   {},
                   gather_rows(table.features, splits.val),
                   {}};
  for (int i : splits.test) ctx.test_labels.push_back(table.labels[i]);
  for (int i : splits.val) ctx.val_labels.push_back(table.labels[i]);

  const int train_size = static_cast<int>(splits.train.size());
  const int initial_budget = round_half_up(config.initial_fraction * train_size);
  const int cycle_budget = round_half_up(config.cycle_fraction * train_size);

  ExperimentRecord record;
  record.seed = seed;
  record.dataset_fp = dataset_fingerprint(table);

  PoolState pools = PoolState::make(splits.train);
  Oracle oracle(table);

  auto t0 = std::chrono::steady_clock::now();
  const auto initial =
      initpool::select_initial_pool(config.initial_strategy, table, pools.unlabeled,
                                    initial_budget, seed);
  oracle.label(initial);
  pools.acquire(initial);
  pools.check();
  record.initial_indices = initial;

  nn::TrainedModel model = train_target(ctx, pools.labeled, derive_seed(seed, 3, 0));
  record.wall_time_s.push_back(seconds_since(t0));
  record.labeled_sizes.push_back(static_cast<int>(pools.labeled.size()));
  record.test_accuracy.push_back(nn::accuracy(model, ctx.test_inputs, ctx.test_labels));
  record.val_accuracy.push_back(
      ctx.val_inputs.rows > 0 ? nn::accuracy(model, ctx.val_inputs, ctx.val_labels) : kNaN);

  for (int cycle = 1; cycle <= config.cycle_count; ++cycle) {
    t0 = std::chrono::steady_clock::now();
    const auto selected = query_select(ctx, model, pools, cycle_budget, seed, cycle);
    oracle.label(selected);
    pools.acquire(selected);
    pools.check();
    record.cycle_indices.push_back(selected);

    model = train_target(ctx, pools.labeled, derive_seed(seed, 3, static_cast<std::uint64_t>(cycle)));
    record.wall_time_s.push_back(seconds_since(t0));
    record.labeled_sizes.push_back(static_cast<int>(pools.labeled.size()));
    record.test_accuracy.push_back(nn::accuracy(model, ctx.test_inputs, ctx.test_labels));
    record.val_accuracy.push_back(
        ctx.val_inputs.rows > 0 ? nn::accuracy(model, ctx.val_inputs, ctx.val_labels) : kNaN);
  }

  record.annotations = oracle.annotations();
  require(record.annotations == static_cast<long>(pools.labeled.size()), Err::ConfigInvalid,
          "annotation counter diverged from labeled pool size");
  return record;
}

}  // namespace poolseed::al
