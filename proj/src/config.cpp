#include "poolseed/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

namespace poolseed::config {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_keys(const nlohmann::json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  require(j.is_object(), Err::ConfigParse, path + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) fail(Err::ConfigParse, path + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ConfigParse, path + "." + key + ": " + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// --- enum <-> string tables -------------------------------------------------

std::string initial_kind_name(initpool::StrategyKind k) {
  switch (k) {
    case initpool::StrategyKind::Random: return "random";
    case initpool::StrategyKind::SslTopK: return "ssl_topk";
    case initpool::StrategyKind::SslBinned: return "ssl_binned";
    case initpool::StrategyKind::ClusterEqual: return "cluster_equal";
    case initpool::StrategyKind::ClusterProportional: return "cluster_proportional";
  }
  return "?";
}

initpool::StrategyKind parse_initial_kind(const std::string& s, const std::string& path) {
  if (s == "random") return initpool::StrategyKind::Random;
  if (s == "ssl_topk") return initpool::StrategyKind::SslTopK;
  if (s == "ssl_binned") return initpool::StrategyKind::SslBinned;
  if (s == "cluster_equal") return initpool::StrategyKind::ClusterEqual;
  if (s == "cluster_proportional") return initpool::StrategyKind::ClusterProportional;
  fail(Err::Validation, path + ": unknown initial pool strategy '" + s + "'");
}

std::string task_kind_name(pretext::TaskKind k) {
  switch (k) {
    case pretext::TaskKind::Rotation4: return "rotation4";
    case pretext::TaskKind::MaskedReconstruction: return "masked_reconstruction";
    case pretext::TaskKind::Autoencoder: return "autoencoder";
    case pretext::TaskKind::Vae: return "vae";
  }
  return "?";
}

pretext::TaskKind parse_task_kind(const std::string& s, const std::string& path) {
  if (s == "rotation4") return pretext::TaskKind::Rotation4;
  if (s == "masked_reconstruction") return pretext::TaskKind::MaskedReconstruction;
  if (s == "autoencoder") return pretext::TaskKind::Autoencoder;
  if (s == "vae") return pretext::TaskKind::Vae;
  fail(Err::Validation, path + ": unknown pretext task '" + s + "'");
}

std::string query_kind_name(query::QueryKind k) {
  switch (k) {
    case query::QueryKind::Random: return "random";
    case query::QueryKind::LeastConfidence: return "least_confidence";
    case query::QueryKind::MaxEntropy: return "max_entropy";
    case query::QueryKind::MinMargin: return "min_margin";
    case query::QueryKind::DbalEntropy: return "dbal_entropy";
    case query::QueryKind::DbalBald: return "dbal_bald";
    case query::QueryKind::CoresetGreedy: return "coreset";
    case query::QueryKind::EnsVarR: return "ens_varr";
    case query::QueryKind::EnsLC: return "ens_lc";
    case query::QueryKind::EnsME: return "ens_me";
    case query::QueryKind::EnsMM: return "ens_mm";
  }
  return "?";
}

query::QueryKind parse_query_kind(const std::string& s, const std::string& path) {
  if (s == "random") return query::QueryKind::Random;
  if (s == "least_confidence") return query::QueryKind::LeastConfidence;
  if (s == "max_entropy") return query::QueryKind::MaxEntropy;
  if (s == "min_margin") return query::QueryKind::MinMargin;
  if (s == "dbal_entropy") return query::QueryKind::DbalEntropy;
  if (s == "dbal_bald") return query::QueryKind::DbalBald;
  if (s == "coreset") return query::QueryKind::CoresetGreedy;
  if (s == "ens_varr") return query::QueryKind::EnsVarR;
  if (s == "ens_lc") return query::QueryKind::EnsLC;
  if (s == "ens_me") return query::QueryKind::EnsME;
  if (s == "ens_mm") return query::QueryKind::EnsMM;
  fail(Err::Validation, path + ": unknown query strategy '" + s + "'");
}

nn::AdamConfig parse_adam(const nlohmann::json& j, const std::string& path,
                          nn::AdamConfig defaults) {
  check_keys(j, path,
             {"learning_rate", "weight_decay", "beta1", "beta2", "epsilon", "batch_size",
              "max_epochs", "early_stop_patience"});
  nn::AdamConfig adam = defaults;
  read(j, "learning_rate", adam.learning_rate, path);
  read(j, "weight_decay", adam.weight_decay, path);
  read(j, "beta1", adam.beta1, path);
  read(j, "beta2", adam.beta2, path);
  read(j, "epsilon", adam.epsilon, path);
  read(j, "batch_size", adam.batch_size, path);
  read(j, "max_epochs", adam.max_epochs, path);
  read(j, "early_stop_patience", adam.early_stop_patience, path);
  return adam;
}

nlohmann::json adam_json(const nn::AdamConfig& adam) {
  return {{"learning_rate", adam.learning_rate},
          {"weight_decay", adam.weight_decay},
          {"beta1", adam.beta1},
          {"beta2", adam.beta2},
          {"epsilon", adam.epsilon},
          {"batch_size", adam.batch_size},
          {"max_epochs", adam.max_epochs},
          {"early_stop_patience", adam.early_stop_patience}};
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  check_keys(j, "$", {"dataset", "split", "model", "initial", "query", "al", "seeds"});
  ExperimentConfig cfg;

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    check_keys(d, "$.dataset",
               {"kind", "images", "labels", "csv", "n", "mean_a", "mean_b", "sigma", "classes",
                "side", "seed", "subset", "longtail_factor", "normalize"});
    read(d, "kind", cfg.dataset.kind, "$.dataset");
    read(d, "images", cfg.dataset.images, "$.dataset");
    if (d.contains("labels")) cfg.dataset.labels_path = d.at("labels").get<std::string>();
    read(d, "csv", cfg.dataset.csv, "$.dataset");
    read(d, "n", cfg.dataset.n, "$.dataset");
    read(d, "mean_a", cfg.dataset.mean_a, "$.dataset");
    read(d, "mean_b", cfg.dataset.mean_b, "$.dataset");
    read(d, "sigma", cfg.dataset.sigma, "$.dataset");
    read(d, "classes", cfg.dataset.classes, "$.dataset");
    read(d, "side", cfg.dataset.side, "$.dataset");
    read(d, "seed", cfg.dataset.seed, "$.dataset");
    read(d, "subset", cfg.dataset.subset, "$.dataset");
    read(d, "longtail_factor", cfg.dataset.longtail_factor, "$.dataset");
    if (d.contains("normalize")) {
      const auto& n = d.at("normalize");
      check_keys(n, "$.dataset.normalize", {"mean", "std"});
      cfg.dataset.normalize = true;
      read(n, "mean", cfg.dataset.normalize_mean, "$.dataset.normalize");
      read(n, "std", cfg.dataset.normalize_std, "$.dataset.normalize");
    }
    require(cfg.dataset.kind == "idx" || cfg.dataset.kind == "csv" ||
                cfg.dataset.kind == "two_gaussians" || cfg.dataset.kind == "synth_digits",
            Err::Validation, "$.dataset.kind: unknown kind '" + cfg.dataset.kind + "'");
  }

  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, "$.split", {"val_fraction", "test_fraction", "seed"});
    read(s, "val_fraction", cfg.split.val_fraction, "$.split");
    read(s, "test_fraction", cfg.split.test_fraction, "$.split");
    read(s, "seed", cfg.split.seed, "$.split");
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, "$.model", {"hidden", "dropout", "adam"});
    read(m, "hidden", cfg.model.hidden, "$.model");
    read(m, "dropout", cfg.model.dropout, "$.model");
    if (m.contains("adam")) cfg.model.adam = parse_adam(m.at("adam"), "$.model.adam", cfg.model.adam);
  }

  if (j.contains("initial")) {
    const auto& i = j.at("initial");
    check_keys(i, "$.initial",
               {"kind", "task", "n_bins", "space", "within_cluster", "cluster_k", "adam"});
    std::string kind = initial_kind_name(cfg.initial.kind);
    read(i, "kind", kind, "$.initial");
    cfg.initial.kind = parse_initial_kind(kind, "$.initial.kind");
    if (i.contains("task")) {
      const auto& t = i.at("task");
      check_keys(t, "$.initial.task", {"kind", "mask_size", "latent_dim"});
      std::string task_kind = task_kind_name(cfg.initial.task.kind);
      read(t, "kind", task_kind, "$.initial.task");
      cfg.initial.task.kind = parse_task_kind(task_kind, "$.initial.task.kind");
      read(t, "mask_size", cfg.initial.task.mask_size, "$.initial.task");
      read(t, "latent_dim", cfg.initial.task.latent_dim, "$.initial.task");
    }
    read(i, "n_bins", cfg.initial.n_bins, "$.initial");
    if (i.contains("space")) {
      const std::string s = i.at("space").get<std::string>();
      if (s == "raw") cfg.initial.space = initpool::ClusterSpace::Raw;
      else if (s == "embedding") cfg.initial.space = initpool::ClusterSpace::PretextEmbedding;
      else fail(Err::Validation, "$.initial.space: unknown space '" + s + "'");
    }
    if (i.contains("within_cluster")) {
      const std::string w = i.at("within_cluster").get<std::string>();
      if (w == "uniform") cfg.initial.within = initpool::WithinCluster::Uniform;
      else if (w == "central") cfg.initial.within = initpool::WithinCluster::Central;
      else fail(Err::Validation, "$.initial.within_cluster: unknown mode '" + w + "'");
    }
    read(i, "cluster_k", cfg.initial.cluster_k, "$.initial");
    if (i.contains("adam")) cfg.pretext_adam = parse_adam(i.at("adam"), "$.initial.adam", cfg.pretext_adam);
    if (cfg.initial.kind == initpool::StrategyKind::SslBinned)
      require(cfg.initial.n_bins >= 2, Err::Validation, "$.initial.n_bins: must be >= 2");
  }

  if (j.contains("query")) {
    const auto& q = j.at("query");
    check_keys(q, "$.query", {"kind", "mc_passes", "ensemble_size"});
    std::string kind = query_kind_name(cfg.query.kind);
    read(q, "kind", kind, "$.query");
    cfg.query.kind = parse_query_kind(kind, "$.query.kind");
    read(q, "mc_passes", cfg.query.mc_passes, "$.query");
    read(q, "ensemble_size", cfg.query.ensemble_size, "$.query");
    cfg.query.validate();
  }

  if (j.contains("al")) {
    const auto& a = j.at("al");
    check_keys(a, "$.al", {"initial_fraction", "cycle_fraction", "cycles", "debug_scores"});
    read(a, "initial_fraction", cfg.initial_fraction, "$.al");
    read(a, "cycle_fraction", cfg.cycle_fraction, "$.al");
    read(a, "cycles", cfg.cycle_count, "$.al");
    read(a, "debug_scores", cfg.debug_scores, "$.al");
  }

  read(j, "seeds", cfg.seeds, "$");
  require(!cfg.seeds.empty(), Err::Validation, "$.seeds: need at least one seed");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Err::ConfigParse, "cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Err::ConfigParse, path + ": " + e.what());
  }
  return parse_config(j);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = {{"kind", cfg.dataset.kind},
                  {"images", cfg.dataset.images},
                  {"labels", cfg.dataset.labels_path},
                  {"csv", cfg.dataset.csv},
                  {"n", cfg.dataset.n},
                  {"mean_a", cfg.dataset.mean_a},
                  {"mean_b", cfg.dataset.mean_b},
                  {"sigma", cfg.dataset.sigma},
                  {"classes", cfg.dataset.classes},
                  {"side", cfg.dataset.side},
                  {"seed", cfg.dataset.seed},
                  {"subset", cfg.dataset.subset},
                  {"longtail_factor", cfg.dataset.longtail_factor}};
  if (cfg.dataset.normalize)
    j["dataset"]["normalize"] = {{"mean", cfg.dataset.normalize_mean},
                                 {"std", cfg.dataset.normalize_std}};
  j["split"] = {{"val_fraction", cfg.split.val_fraction},
                {"test_fraction", cfg.split.test_fraction},
                {"seed", cfg.split.seed}};
  j["model"] = {{"hidden", cfg.model.hidden},
                {"dropout", cfg.model.dropout},
                {"adam", adam_json(cfg.model.adam)}};
  j["initial"] = {{"kind", initial_kind_name(cfg.initial.kind)},
                  {"task",
                   {{"kind", task_kind_name(cfg.initial.task.kind)},
                    {"mask_size", cfg.initial.task.mask_size},
                    {"latent_dim", cfg.initial.task.latent_dim}}},
                  {"n_bins", cfg.initial.n_bins},
                  {"space", cfg.initial.space == initpool::ClusterSpace::Raw ? "raw" : "embedding"},
                  {"within_cluster",
                   cfg.initial.within == initpool::WithinCluster::Uniform ? "uniform" : "central"},
                  {"cluster_k", cfg.initial.cluster_k},
                  {"adam", adam_json(cfg.pretext_adam)}};
  j["query"] = {{"kind", query_kind_name(cfg.query.kind)},
                {"mc_passes", cfg.query.mc_passes},
                {"ensemble_size", cfg.query.ensemble_size}};
  j["al"] = {{"initial_fraction", cfg.initial_fraction},
             {"cycle_fraction", cfg.cycle_fraction},
             {"cycles", cfg.cycle_count},
             {"debug_scores", cfg.debug_scores}};
  j["seeds"] = cfg.seeds;
  return j;
}

nlohmann::json ExperimentConfig::canonical() const {
  nlohmann::json j = to_json(*this);
  j.erase("seeds");
  return j;
}

std::string ExperimentConfig::fingerprint() const { return hex64(fnv1a(canonical().dump())); }

al::ALConfig ExperimentConfig::al_config() const {
  al::ALConfig al;
  al.initial_fraction = initial_fraction;
  al.cycle_fraction = cycle_fraction;
  al.cycle_count = cycle_count;
  al.initial_strategy = initial;
  al.initial_strategy.pretext_config.adam = pretext_adam;
  al.query_strategy = query;
  al.model = model;
  al.debug_scores = debug_scores;
  return al;
}

void apply_override(nlohmann::json& j, const std::string& dotted_key,
                    const nlohmann::json& value) {
  nlohmann::json* node = &j;
  std::stringstream ss(dotted_key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  require(!parts.empty(), Err::InvalidGridKey, "empty grid key");
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    require(node->is_object() && node->contains(parts[i]), Err::InvalidGridKey,
            "grid key '" + dotted_key + "' has no segment '" + parts[i] + "'");
    node = &node->at(parts[i]);
  }
  require(node->is_object() && node->contains(parts.back()), Err::InvalidGridKey,
          "grid key '" + dotted_key + "' does not exist in the base config");
  (*node)[parts.back()] = value;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  DataTable table;
  if (d.kind == "idx") {
    table = load_idx(d.images, d.labels_path);
  } else if (d.kind == "csv") {
    table = load_csv(d.csv);
  } else if (d.kind == "two_gaussians") {
    table = generate_two_gaussians(d.n, d.mean_a, d.mean_b, d.sigma, d.seed);
  } else if (d.kind == "synth_digits") {
    table = generate_synthetic_digits(d.n, d.classes, d.side, d.seed);
  } else {
    fail(Err::Validation, "unknown dataset kind " + d.kind);
  }
  if (d.subset > 0 && d.subset < table.rows())
    table = stratified_subset(table, d.subset, derive_seed(d.seed, 0x5E7));
  if (d.longtail_factor > 1.0)
    table = apply_longtail(table, d.longtail_factor, derive_seed(d.seed, 0x7A1));
  if (d.normalize) table = normalize(table, d.normalize_mean, d.normalize_std);

  PreparedData out;
  out.splits = split(table, cfg.split.val_fraction, cfg.split.test_fraction, cfg.split.seed);
  out.table = std::move(table);
  return out;
}

nlohmann::json record_to_json(const al::ExperimentRecord& record) {
  nlohmann::json j;
  j["schema"] = "poolseed.record.v1";
  j["fingerprint"] = record.fingerprint;
  j["seed"] = record.seed;
  j["dataset_fp"] = hex64(record.dataset_fp);
  j["labeled_sizes"] = record.labeled_sizes;
  j["test_accuracy"] = record.test_accuracy;
  nlohmann::json val = nlohmann::json::array();
  for (double v : record.val_accuracy) {
    if (std::isnan(v))
      val.push_back(nullptr);
    else
      val.push_back(v);
  }
  j["val_accuracy"] = val;
  j["initial_indices"] = record.initial_indices;
  j["cycle_indices"] = record.cycle_indices;
  j["annotations"] = record.annotations;
  return j;
}

al::ExperimentRecord record_from_json(const nlohmann::json& j) {
  require(j.value("schema", "") == "poolseed.record.v1", Err::ConfigParse,
          "unknown record schema");
  al::ExperimentRecord record;
  record.fingerprint = j.at("fingerprint").get<std::string>();
  record.seed = j.at("seed").get<std::uint64_t>();
  record.dataset_fp = std::stoull(j.at("dataset_fp").get<std::string>(), nullptr, 16);
  record.labeled_sizes = j.at("labeled_sizes").get<std::vector<int>>();
  record.test_accuracy = j.at("test_accuracy").get<std::vector<double>>();
  for (const auto& v : j.at("val_accuracy"))
    record.val_accuracy.push_back(v.is_null() ? kNaN : v.get<double>());
  record.initial_indices = j.at("initial_indices").get<std::vector<int>>();
  record.cycle_indices = j.at("cycle_indices").get<std::vector<std::vector<int>>>();
  record.annotations = j.at("annotations").get<long>();
  return record;
}

}  // namespace poolseed::config
