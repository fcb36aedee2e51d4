#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "poolseed/matrix.hpp"

namespace poolseed::nn {

enum class LayerKind { Dense, Relu, Dropout, Reshape, Latent };

struct Layer {
  LayerKind kind = LayerKind::Dense;
  int in = 0;
  int out = 0;
  double rate = 0.0;  // dropout only
};

inline Layer dense(int in, int out) { return {LayerKind::Dense, in, out, 0.0}; }
inline Layer relu(int dim) { return {LayerKind::Relu, dim, dim, 0.0}; }
inline Layer dropout(int dim, double rate) { return {LayerKind::Dropout, dim, dim, rate}; }
inline Layer reshape(int dim) { return {LayerKind::Reshape, dim, dim, 0.0}; }
// Gaussian reparameterization point: consumes (mu, logvar) of width 2*dim,
// emits a dim-wide latent. Requires the gaussian-vae head.
inline Layer latent(int dim) { return {LayerKind::Latent, 2 * dim, dim, 0.0}; }

enum class HeadKind { SoftmaxCrossEntropy, MeanSquaredError, GaussianVae };

struct Head {
  HeadKind kind = HeadKind::SoftmaxCrossEntropy;
  int latent_dim = 0;  // gaussian-vae only
};

struct NetworkSpec {
  std::vector<Layer> layers;
  Head head;

  void validate() const;
  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;
  bool has_dropout() const;
  bool has_dense() const;
  std::string describe() const;  // stable textual form
};

NetworkSpec mlp_classifier(int input_dim, const std::vector<int>& hidden, int classes,
                           double dropout_rate);
// hidden = encoder widths, innermost last; the decoder mirrors them.
NetworkSpec autoencoder(int input_dim, const std::vector<int>& hidden);
NetworkSpec vae(int input_dim, int encoder_width, int latent_dim);

struct AdamConfig {
  double learning_rate = 5e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int max_epochs = 50;
  int early_stop_patience = 5;

  void validate() const;
};

// Integer class labels for the softmax head, row targets otherwise.
using Targets = std::variant<std::vector<int>, Matrix>;

struct EpochLog {
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when no validation set
};

struct TrainedModel {
  NetworkSpec spec;
  std::vector<double> parameters;
  std::vector<EpochLog> train_log;

  std::uint64_t fingerprint() const;
};

// Train mode draws dropout masks and latent noise from mask_seed; eval mode
// disables dropout and uses the posterior mean at latent layers.
struct PassMode {
  bool train = false;
  std::uint64_t mask_seed = 0;

  static PassMode eval() { return {}; }
  static PassMode training(std::uint64_t seed) { return {true, seed}; }
};

TrainedModel train(const NetworkSpec& spec, const Matrix& inputs, const Targets& targets,
                   const AdamConfig& config,
                   const std::optional<std::pair<Matrix, Targets>>& val, std::uint64_t seed);

// Exact analytic gradient of the mean batch loss (weight decay excluded).
std::vector<double> gradient(const NetworkSpec& spec, const std::vector<double>& parameters,
                             const Matrix& inputs, const Targets& targets,
                             PassMode mode = PassMode::eval());

double batch_loss(const NetworkSpec& spec, const std::vector<double>& parameters,
                  const Matrix& inputs, const Targets& targets, PassMode mode = PassMode::eval());

Matrix predict_proba(const TrainedModel& model, const Matrix& inputs);

struct McDropout {
  int passes = 25;
  std::uint64_t seed = 0;
};
Matrix predict_proba(const TrainedModel& model, const Matrix& inputs, const McDropout& mc);
std::vector<Matrix> mc_dropout_passes(const TrainedModel& model, const Matrix& inputs, int passes,
                                      std::uint64_t seed);

std::vector<double> per_sample_loss(const TrainedModel& model, const Matrix& inputs,
                                    const Targets& targets);

struct VaeLossParts {
  std::vector<double> reconstruction;
  std::vector<double> kl;
};
VaeLossParts vae_loss_parts(const TrainedModel& model, const Matrix& inputs, const Matrix& targets);

// Activations entering the last dense layer (eval mode).
Matrix embed(const TrainedModel& model, const Matrix& inputs);

std::vector<double> he_uniform_init(const NetworkSpec& spec, std::uint64_t seed);

// Versioned JSON checkpoint; parameters round-trip exactly.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

std::vector<int> predict_labels(const TrainedModel& model, const Matrix& inputs);
double accuracy(const TrainedModel& model, const Matrix& inputs, const std::vector<int>& labels);

}  // namespace poolseed::nn
