#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace poolseed::demo {

// Two-Gaussian toy study: a linear softmax model trained on the full 500-point
// set and on 35-point pools chosen randomly / by least-confidence / by
// max-entropy (scored with the full-data model). Accuracies are measured on a
// held-out draw from the same distribution, over `trials` derived seeds.
struct DemoResult {
  std::map<std::string, std::vector<double>> accuracy;  // variant -> per-trial accuracy
  double bayes_accuracy = 0.0;                          // analytic reference

  double mean(const std::string& variant) const;
};

DemoResult run_demo_fig1(const std::string& out_dir, std::uint64_t seed, int trials = 5);

}  // namespace poolseed::demo
