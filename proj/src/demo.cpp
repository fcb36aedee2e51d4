#include "poolseed/demo.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "poolseed/alloop.hpp"
#include "poolseed/dataset.hpp"
#include "poolseed/error.hpp"
#include "poolseed/nn.hpp"
#include "poolseed/query.hpp"
#include "poolseed/report.hpp"
#include "poolseed/rng.hpp"

namespace poolseed::demo {

namespace {

constexpr int kTrainPoints = 500;
constexpr int kTestPoints = 4000;
constexpr int kLabelBudget = 35;

nn::TrainedModel fit_linear(const DataTable& table, const std::vector<int>& rows,
                            std::uint64_t seed) {
  const auto spec = nn::mlp_classifier(2, {}, 2, 0.0);  // single dense layer + softmax
  nn::AdamConfig adam;
  adam.learning_rate = 0.05;
  adam.weight_decay = 0.0;
  adam.batch_size = 64;
  adam.max_epochs = 200;
  adam.early_stop_patience = 0;
  const Matrix inputs = gather_rows(table.features, rows);
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (int r : rows) labels.push_back(table.labels[r]);
  return nn::train(spec, inputs, labels, adam, std::nullopt, seed);
}

void write_boundary(const nn::TrainedModel& model, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << "x,y,p_class1\n";
  const int steps = 81;
  Matrix grid(steps * steps, 2);
  for (int iy = 0; iy < steps; ++iy)
    for (int ix = 0; ix < steps; ++ix) {
      grid(iy * steps + ix, 0) = -6.0 + 12.0 * ix / (steps - 1);
      grid(iy * steps + ix, 1) = -4.0 + 8.0 * iy / (steps - 1);
    }
  const Matrix probs = nn::predict_proba(model, grid);
  for (int i = 0; i < grid.rows; ++i)
    out << report::format_double(grid(i, 0)) << "," << report::format_double(grid(i, 1)) << ","
        << report::format_double(probs(i, 1)) << "\n";
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

}  // namespace

double DemoResult::mean(const std::string& variant) const {
  const auto& v = accuracy.at(variant);
  double sum = 0.0;
  for (double a : v) sum += a;
  return sum / v.size();
}

DemoResult run_demo_fig1(const std::string& out_dir, std::uint64_t seed, int trials) {
  std::filesystem::create_directories(out_dir);
  const DataTable train =
      generate_two_gaussians(kTrainPoints, {-2.0, 0.0}, {2.0, 0.0}, 1.0, derive_seed(seed, 1));
  const DataTable test =
      generate_two_gaussians(kTestPoints, {-2.0, 0.0}, {2.0, 0.0}, 1.0, derive_seed(seed, 2));

  std::vector<int> all_rows(train.rows());
  for (int i = 0; i < train.rows(); ++i) all_rows[i] = i;

  DemoResult result;
  // equal isotropic Gaussians at distance 4: the optimal boundary is the
  // perpendicular bisector, accuracy = Phi(half-distance / sigma) = Phi(2)
  result.bayes_accuracy = 0.5 * std::erfc(-2.0 / std::sqrt(2.0));

  const char* variants[] = {"full", "random35", "lc35", "me35"};
  for (const char* v : variants) result.accuracy[v] = {};

  std::ofstream acc(out_dir + "/accuracy.csv");
  require(acc.good(), Err::IoFailure, "cannot write accuracy.csv");
  acc << "variant,trial,accuracy\n";

  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t ts = derive_seed(seed, 10, static_cast<std::uint64_t>(trial));

    const auto full = fit_linear(train, all_rows, derive_seed(ts, 1));
    const Matrix pool_probs = nn::predict_proba(full, train.features);

    Rng rng(derive_seed(ts, 2));
    const auto random35 = rng.sample(all_rows, kLabelBudget);
    const auto lc35 = query::top_k(
        query::uncertainty_scores(pool_probs, query::UncertaintyKind::LeastConfidence), all_rows,
        kLabelBudget);
    const auto me35 = query::top_k(
        query::uncertainty_scores(pool_probs, query::UncertaintyKind::MaxEntropy), all_rows,
        kLabelBudget);

    const std::map<std::string, std::vector<int>> pools = {
        {"full", all_rows}, {"random35", random35}, {"lc35", lc35}, {"me35", me35}};
    for (const auto& [name, rows] : pools) {
      const auto model = fit_linear(train, rows, derive_seed(ts, 3, fnv1a(name)));
      const double a = nn::accuracy(model, test.features, test.labels);
      result.accuracy[name].push_back(a);
      acc << name << "," << trial << "," << report::format_double(a) << "\n";
      if (trial == 0) {
        write_boundary(model, out_dir + "/boundary_" + name + ".csv");
        if (name != "full") {
          std::ofstream sel(out_dir + "/selected_" + name + ".csv");
          sel << "order,index\n";
          for (std::size_t i = 0; i < rows.size(); ++i) sel << i << "," << rows[i] << "\n";
        }
      }
    }

    if (trial == 0) {
      // per-sample training loss of the full-data model
      const auto losses = nn::per_sample_loss(full, train.features, train.labels);
      std::ofstream loss(out_dir + "/train_loss.csv");
      require(loss.good(), Err::IoFailure, "cannot write train_loss.csv");
      loss << "index,x,y,label,ce_loss\n";
      for (int i = 0; i < train.rows(); ++i)
        loss << i << "," << report::format_double(train.features(i, 0)) << ","
             << report::format_double(train.features(i, 1)) << "," << train.labels[i] << ","
             << report::format_double(losses[i]) << "\n";
      std::ofstream pts(out_dir + "/dataset.csv");
      pts << "index,x,y,label\n";
      for (int i = 0; i < train.rows(); ++i)
        pts << i << "," << report::format_double(train.features(i, 0)) << ","
            << report::format_double(train.features(i, 1)) << "," << train.labels[i] << "\n";
    }
  }

  std::ofstream summary(out_dir + "/summary.csv");
  require(summary.good(), Err::IoFailure, "cannot write summary.csv");
  summary << "variant,mean_acc,bayes_acc\n";
  for (const char* v : variants)
    summary << v << "," << report::format_double(result.mean(v)) << ","
            << report::format_double(result.bayes_accuracy) << "\n";
  return result;
}

}  // namespace poolseed::demo
