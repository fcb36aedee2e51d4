#include "poolseed/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

namespace poolseed::nn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* layer_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Reshape: return "reshape";
    case LayerKind::Latent: return "latent";
  }
  return "?";
}

const char* head_name(HeadKind k) {
  switch (k) {
    case HeadKind::SoftmaxCrossEntropy: return "softmax_ce";
    case HeadKind::MeanSquaredError: return "mse";
    case HeadKind::GaussianVae: return "gaussian_vae";
  }
  return "?";
}

// Parameter offsets; only dense layers own parameters, laid out [W, b].
std::vector<std::size_t> param_offsets(const NetworkSpec& spec) {
  std::vector<std::size_t> offsets(spec.layers.size() + 1, 0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    offsets[i] = total;
    const Layer& l = spec.layers[i];
    if (l.kind == LayerKind::Dense) total += std::size_t(l.in) * l.out + l.out;
  }
  offsets[spec.layers.size()] = total;
  return offsets;
}

struct Cache {
  std::vector<Matrix> acts;          // acts[i] = input to layer i; back() = network output
  std::vector<Matrix> dropout_mask;  // aligned with layers; empty when unused
  Matrix mu, logvar, eps;            // latent layer state
  int latent_layer = -1;
};

// Forward pass through the layer stack (no head). Caches what backward needs.
void forward(const NetworkSpec& spec, const double* params, const Matrix& inputs, PassMode mode,
             Cache& cache) {
  const auto offsets = param_offsets(spec);
  Rng rng(mode.mask_seed);
  cache.acts.clear();
  cache.acts.reserve(spec.layers.size() + 1);
  cache.dropout_mask.assign(spec.layers.size(), Matrix());
  cache.acts.push_back(inputs);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& l = spec.layers[i];
    const Matrix& x = cache.acts.back();
    Matrix y(x.rows, l.out);
    switch (l.kind) {
      case LayerKind::Dense: {
        const double* w = params + offsets[i];
        const double* b = w + std::size_t(l.in) * l.out;
        gemm_bias(x, w, b, y);
        break;
      }
      case LayerKind::Relu:
        for (std::size_t j = 0; j < x.data.size(); ++j) y.data[j] = x.data[j] > 0.0 ? x.data[j] : 0.0;
        break;
      case LayerKind::Dropout:
        if (mode.train && l.rate > 0.0) {
          Matrix mask(x.rows, x.cols);
          const double scale = 1.0 / (1.0 - l.rate);
          for (std::size_t j = 0; j < x.data.size(); ++j)
            mask.data[j] = rng.real() >= l.rate ? scale : 0.0;
          for (std::size_t j = 0; j < x.data.size(); ++j) y.data[j] = x.data[j] * mask.data[j];
          cache.dropout_mask[i] = std::move(mask);
        } else {
          y.data = x.data;
        }
        break;
      case LayerKind::Reshape:
        y.data = x.data;
        break;
      case LayerKind::Latent: {
        const int z = l.out;
        cache.latent_layer = static_cast<int>(i);
        cache.mu = Matrix(x.rows, z);
        cache.logvar = Matrix(x.rows, z);
        cache.eps = Matrix(x.rows, z);
        for (int r = 0; r < x.rows; ++r) {
          const double* xr = x.row(r);
          for (int j = 0; j < z; ++j) {
            cache.mu(r, j) = xr[j];
            cache.logvar(r, j) = xr[z + j];
            cache.eps(r, j) = mode.train ? rng.normal() : 0.0;
            y(r, j) = cache.mu(r, j) + std::exp(0.5 * cache.logvar(r, j)) * cache.eps(r, j);
          }
        }
        break;
      }
    }
    cache.acts.push_back(std::move(y));
  }
}

void check_targets(const NetworkSpec& spec, const Matrix& inputs, const Targets& targets) {
  require(inputs.cols == spec.input_dim(), Err::DimensionMismatch,
          "input width " + std::to_string(inputs.cols) + " != spec input " +
              std::to_string(spec.input_dim()));
  if (spec.head.kind == HeadKind::SoftmaxCrossEntropy) {
    const auto* labels = std::get_if<std::vector<int>>(&targets);
    require(labels != nullptr, Err::DimensionMismatch, "softmax head expects integer labels");
    require(static_cast<int>(labels->size()) == inputs.rows, Err::DimensionMismatch,
            "target count != input row count");
    for (int l : *labels)
      require(l >= 0 && l < spec.output_dim(), Err::DimensionMismatch, "label out of range");
  } else {
    const auto* m = std::get_if<Matrix>(&targets);
    require(m != nullptr, Err::DimensionMismatch, "regression head expects matrix targets");
    require(m->rows == inputs.rows && m->cols == spec.output_dim(), Err::DimensionMismatch,
            "target shape mismatch");
  }
}

double sample_kl(const Cache& cache, int row) {
  double kl = 0.0;
  for (int j = 0; j < cache.mu.cols; ++j) {
    const double mu = cache.mu(row, j);
    const double lv = cache.logvar(row, j);
    kl += 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv);
  }
  return kl;
}

// Per-sample head losses given the forward cache.
std::vector<double> head_losses(const NetworkSpec& spec, const Cache& cache, const Targets& targets) {
  const Matrix& out = cache.acts.back();
  const int n = out.rows, d = out.cols;
  std::vector<double> losses(n, 0.0);
  switch (spec.head.kind) {
    case HeadKind::SoftmaxCrossEntropy: {
      const auto& labels = std::get<std::vector<int>>(targets);
      for (int i = 0; i < n; ++i) {
        const double* z = out.row(i);
        double m = z[0];
        for (int j = 1; j < d; ++j) m = std::max(m, z[j]);
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += std::exp(z[j] - m);
        losses[i] = m + std::log(s) - z[labels[i]];
      }
      break;
    }
    case HeadKind::MeanSquaredError: {
      const auto& t = std::get<Matrix>(targets);
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* y = out.row(i);
        const double* ti = t.row(i);
        for (int j = 0; j < d; ++j) {
          const double e = y[j] - ti[j];
          acc += e * e;
        }
        losses[i] = acc / d;
      }
      break;
    }
    case HeadKind::GaussianVae: {
      const auto& t = std::get<Matrix>(targets);
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* y = out.row(i);
        const double* ti = t.row(i);
        for (int j = 0; j < d; ++j) {
          const double e = y[j] - ti[j];
          acc += e * e;
        }
        losses[i] = 0.5 * acc + sample_kl(cache, i);
      }
      break;
    }
  }
  return losses;
}

// Gradient of the mean batch loss w.r.t. the network output.
Matrix head_output_grad(const NetworkSpec& spec, const Cache& cache, const Targets& targets) {
  const Matrix& out = cache.acts.back();
  const int n = out.rows, d = out.cols;
  Matrix dy(n, d);
  switch (spec.head.kind) {
    case HeadKind::SoftmaxCrossEntropy: {
      const auto& labels = std::get<std::vector<int>>(targets);
      for (int i = 0; i < n; ++i) {
        const double* z = out.row(i);
        double m = z[0];
        for (int j = 1; j < d; ++j) m = std::max(m, z[j]);
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += std::exp(z[j] - m);
        double* g = dy.row(i);
        for (int j = 0; j < d; ++j) g[j] = std::exp(z[j] - m) / s / n;
        g[labels[i]] -= 1.0 / n;
      }
      break;
    }
    case HeadKind::MeanSquaredError: {
      const auto& t = std::get<Matrix>(targets);
      for (std::size_t j = 0; j < dy.data.size(); ++j)
        dy.data[j] = 2.0 * (out.data[j] - t.data[j]) / (double(d) * n);
      break;
    }
    case HeadKind::GaussianVae: {
      const auto& t = std::get<Matrix>(targets);
      for (std::size_t j = 0; j < dy.data.size(); ++j)
        dy.data[j] = (out.data[j] - t.data[j]) / n;
      break;
    }
  }
  return dy;
}

// Backpropagates dy through the stack, accumulating parameter gradients.
void backward(const NetworkSpec& spec, const double* params, const Cache& cache, PassMode mode,
              Matrix dy, double* grad) {
  const auto offsets = param_offsets(spec);
  const int n = dy.rows;
  for (int i = static_cast<int>(spec.layers.size()) - 1; i >= 0; --i) {
    const Layer& l = spec.layers[i];
    const Matrix& x = cache.acts[i];
    switch (l.kind) {
      case LayerKind::Dense: {
        const double* w = params + offsets[i];
        double* dw = grad + offsets[i];
        double* db = dw + std::size_t(l.in) * l.out;
        gemm_tn_acc(x, dy, dw, db);
        Matrix dx(n, l.in);
        gemm_nt(dy, w, l.in, dx);
        dy = std::move(dx);
        break;
      }
      case LayerKind::Relu: {
        const Matrix& y = cache.acts[i + 1];
        for (std::size_t j = 0; j < dy.data.size(); ++j)
          if (y.data[j] <= 0.0) dy.data[j] = 0.0;
        break;
      }
      case LayerKind::Dropout:
        if (mode.train && l.rate > 0.0) {
          const Matrix& mask = cache.dropout_mask[i];
          for (std::size_t j = 0; j < dy.data.size(); ++j) dy.data[j] *= mask.data[j];
        }
        break;
      case LayerKind::Reshape:
        break;
      case LayerKind::Latent: {
        const int z = l.out;
        Matrix dx(n, 2 * z);
        const bool kl_term = spec.head.kind == HeadKind::GaussianVae;
        for (int r = 0; r < n; ++r) {
          const double* dz = dy.row(r);
          double* d = dx.row(r);
          for (int j = 0; j < z; ++j) {
            const double lv = cache.logvar(r, j);
            double dmu = dz[j];
            double dlv = mode.train ? dz[j] * cache.eps(r, j) * 0.5 * std::exp(0.5 * lv) : 0.0;
            if (kl_term) {
              dmu += cache.mu(r, j) / n;
              dlv += 0.5 * (std::exp(lv) - 1.0) / n;
            }
            d[j] = dmu;
            d[z + j] = dlv;
          }
        }
        dy = std::move(dx);
        break;
      }
    }
  }
}

double loss_and_gradient(const NetworkSpec& spec, const double* params, const Matrix& inputs,
                         const Targets& targets, PassMode mode, double* grad) {
  Cache cache;
  forward(spec, params, inputs, mode, cache);
  const auto losses = head_losses(spec, cache, targets);
  double total = 0.0;
  for (double l : losses) total += l;
  const double mean = total / losses.size();
  if (grad != nullptr) {
    Matrix dy = head_output_grad(spec, cache, targets);
    backward(spec, params, cache, mode, std::move(dy), grad);
  }
  return mean;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (int i = 0; i < logits.rows; ++i) {
    const double* z = logits.row(i);
    double m = z[0];
    for (int j = 1; j < logits.cols; ++j) m = std::max(m, z[j]);
    double s = 0.0;
    double* pi = p.row(i);
    for (int j = 0; j < logits.cols; ++j) {
      pi[j] = std::exp(z[j] - m);
      s += pi[j];
    }
    for (int j = 0; j < logits.cols; ++j) pi[j] /= s;
  }
  return p;
}

}  // namespace

void NetworkSpec::validate() const {
  require(!layers.empty(), Err::BadSpec, "network needs at least one layer");
  int latent_layers = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    require(l.in >= 1 && l.out >= 1, Err::BadSpec, "layer dimensions must be positive");
    if (l.kind == LayerKind::Dropout)
      require(l.rate >= 0.0 && l.rate < 1.0, Err::BadSpec, "dropout rate must be in [0,1)");
    if (l.kind != LayerKind::Dense && l.kind != LayerKind::Latent)
      require(l.in == l.out, Err::BadSpec, "shape-preserving layer with in != out");
    if (l.kind == LayerKind::Latent) {
      require(l.in == 2 * l.out, Err::BadSpec, "latent layer must consume 2*latent_dim");
      ++latent_layers;
    }
    if (i > 0)
      require(layers[i - 1].out == l.in, Err::BadSpec,
              "layer " + std::to_string(i) + " input " + std::to_string(l.in) +
                  " != previous output " + std::to_string(layers[i - 1].out));
  }
  if (head.kind == HeadKind::GaussianVae) {
    require(latent_layers == 1, Err::BadSpec, "gaussian-vae head needs exactly one latent layer");
    require(head.latent_dim >= 1, Err::BadSpec, "latent_dim must be positive");
    bool found = false;
    for (const Layer& l : layers)
      if (l.kind == LayerKind::Latent && l.out == head.latent_dim) found = true;
    require(found, Err::BadSpec, "latent layer width != head latent_dim");
  } else {
    require(latent_layers == 0, Err::BadSpec, "latent layer requires the gaussian-vae head");
  }
}

int NetworkSpec::input_dim() const { return layers.empty() ? 0 : layers.front().in; }
int NetworkSpec::output_dim() const { return layers.empty() ? 0 : layers.back().out; }

std::size_t NetworkSpec::parameter_count() const { return param_offsets(*this).back(); }

bool NetworkSpec::has_dropout() const {
  for (const Layer& l : layers)
    if (l.kind == LayerKind::Dropout && l.rate > 0.0) return true;
  return false;
}

bool NetworkSpec::has_dense() const {
  for (const Layer& l : layers)
    if (l.kind == LayerKind::Dense) return true;
  return false;
}

std::string NetworkSpec::describe() const {
  std::ostringstream os;
  for (const Layer& l : layers) {
    os << layer_name(l.kind) << "(" << l.in << "," << l.out;
    if (l.kind == LayerKind::Dropout) os << "," << l.rate;
    os << ")|";
  }
  os << "#" << head_name(head.kind);
  if (head.kind == HeadKind::GaussianVae) os << "(" << head.latent_dim << ")";
  return os.str();
}

NetworkSpec mlp_classifier(int input_dim, const std::vector<int>& hidden, int classes,
                           double dropout_rate) {
  NetworkSpec spec;
  int prev = input_dim;
  for (int h : hidden) {
    spec.layers.push_back(dense(prev, h));
    spec.layers.push_back(relu(h));
    if (dropout_rate > 0.0) spec.layers.push_back(dropout(h, dropout_rate));
    prev = h;
  }
  spec.layers.push_back(dense(prev, classes));
  spec.head = {HeadKind::SoftmaxCrossEntropy, 0};
  spec.validate();
  return spec;
}

NetworkSpec autoencoder(int input_dim, const std::vector<int>& hidden) {
  NetworkSpec spec;
  int prev = input_dim;
  for (int h : hidden) {
    spec.layers.push_back(dense(prev, h));
    spec.layers.push_back(relu(h));
    prev = h;
  }
  for (int i = static_cast<int>(hidden.size()) - 2; i >= 0; --i) {
    spec.layers.push_back(dense(prev, hidden[i]));
    spec.layers.push_back(relu(hidden[i]));
    prev = hidden[i];
  }
  spec.layers.push_back(dense(prev, input_dim));
  spec.head = {HeadKind::MeanSquaredError, 0};
  spec.validate();
  return spec;
}

NetworkSpec vae(int input_dim, int encoder_width, int latent_dim) {
  NetworkSpec spec;
  spec.layers.push_back(dense(input_dim, encoder_width));
  spec.layers.push_back(relu(encoder_width));
  spec.layers.push_back(dense(encoder_width, 2 * latent_dim));
  spec.layers.push_back(latent(latent_dim));
  spec.layers.push_back(dense(latent_dim, encoder_width));
  spec.layers.push_back(relu(encoder_width));
  spec.layers.push_back(dense(encoder_width, input_dim));
  spec.head = {HeadKind::GaussianVae, latent_dim};
  spec.validate();
  return spec;
}

void AdamConfig::validate() const {
  require(learning_rate > 0.0, Err::ConfigInvalid, "learning_rate must be positive");
  require(weight_decay >= 0.0, Err::ConfigInvalid, "weight_decay must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, Err::ConfigInvalid,
          "betas must be in [0,1)");
  require(epsilon > 0.0, Err::ConfigInvalid, "epsilon must be positive");
  require(batch_size >= 1, Err::ConfigInvalid, "batch_size must be >= 1");
  require(max_epochs >= 1, Err::ConfigInvalid, "max_epochs must be >= 1");
  require(early_stop_patience >= 0, Err::ConfigInvalid, "patience must be >= 0");
}

std::uint64_t TrainedModel::fingerprint() const {
  std::uint64_t h = fnv1a(spec.describe());
  return fnv1a(parameters.data(), parameters.size() * sizeof(double), h);
}

std::vector<double> he_uniform_init(const NetworkSpec& spec, std::uint64_t seed) {
  std::vector<double> params(spec.parameter_count(), 0.0);
  const auto offsets = param_offsets(spec);
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const Layer& l = spec.layers[i];
    if (l.kind != LayerKind::Dense) continue;
    const double limit = std::sqrt(6.0 / l.in);
    double* w = params.data() + offsets[i];
    for (std::size_t j = 0; j < std::size_t(l.in) * l.out; ++j)
      w[j] = (2.0 * rng.real() - 1.0) * limit;
    // biases stay zero
  }
  return params;
}

namespace {

Targets gather_targets(const Targets& targets, const std::vector<int>& rows) {
  if (const auto* labels = std::get_if<std::vector<int>>(&targets)) {
    std::vector<int> out;
    out.reserve(rows.size());
    for (int r : rows) out.push_back((*labels)[r]);
    return out;
  }
  return gather_rows(std::get<Matrix>(targets), rows);
}

}  // namespace

TrainedModel train(const NetworkSpec& spec, const Matrix& inputs, const Targets& targets,
                   const AdamConfig& config,
                   const std::optional<std::pair<Matrix, Targets>>& val, std::uint64_t seed) {
  spec.validate();
  config.validate();
  check_targets(spec, inputs, targets);
  require(inputs.rows >= 1, Err::DimensionMismatch, "need at least one training sample");
  if (val) check_targets(spec, val->first, val->second);

  std::vector<double> params = he_uniform_init(spec, derive_seed(seed, 1));
  const std::size_t n_params = params.size();
  std::vector<double> grad(n_params), m(n_params, 0.0), v(n_params, 0.0);
  const auto offsets = param_offsets(spec);

  std::vector<double> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  long step = 0;
  std::vector<EpochLog> log;

  const int n = inputs.rows;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, 2, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int batch_index = 0;
    for (int start = 0; start < n; start += config.batch_size, ++batch_index) {
      const int stop = std::min(n, start + config.batch_size);
      const std::vector<int> rows(order.begin() + start, order.begin() + stop);
      const Matrix bx = gather_rows(inputs, rows);
      const Targets bt = gather_targets(targets, rows);

      std::fill(grad.begin(), grad.end(), 0.0);
      const PassMode mode = PassMode::training(
          derive_seed(seed, 3, (std::uint64_t(epoch) << 24) + std::uint64_t(batch_index)));
      const double loss = loss_and_gradient(spec, params.data(), bx, bt, mode, grad.data());
      require(std::isfinite(loss), Err::DivergedLoss,
              "non-finite loss at epoch " + std::to_string(epoch));
      epoch_loss += loss * rows.size();

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t j = 0; j < n_params; ++j) {
        m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * grad[j];
        v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * grad[j] * grad[j];
        params[j] -= config.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + config.epsilon);
      }
      if (config.weight_decay > 0.0) {
        // decoupled decay on dense weight matrices, biases exempt
        for (std::size_t i = 0; i < spec.layers.size(); ++i) {
          const Layer& l = spec.layers[i];
          if (l.kind != LayerKind::Dense) continue;
          double* w = params.data() + offsets[i];
          const double f = 1.0 - config.learning_rate * config.weight_decay;
          for (std::size_t j = 0; j < std::size_t(l.in) * l.out; ++j) w[j] *= f;
        }
      }
    }

    EpochLog entry;
    entry.train_loss = epoch_loss / n;
    entry.val_loss = kNaN;
    if (val) {
      entry.val_loss = loss_and_gradient(spec, params.data(), val->first, val->second,
                                         PassMode::eval(), nullptr);
      require(std::isfinite(entry.val_loss), Err::DivergedLoss, "non-finite validation loss");
      if (entry.val_loss < best_val) {
        best_val = entry.val_loss;
        best_params = params;
        stale_epochs = 0;
      } else {
        ++stale_epochs;
      }
    }
    log.push_back(entry);
    if (val && stale_epochs > config.early_stop_patience) break;
  }

  TrainedModel model;
  model.spec = spec;
  model.parameters = (val && !best_params.empty()) ? std::move(best_params) : std::move(params);
  model.train_log = std::move(log);
  return model;
}

std::vector<double> gradient(const NetworkSpec& spec, const std::vector<double>& parameters,
                             const Matrix& inputs, const Targets& targets, PassMode mode) {
  spec.validate();
  require(parameters.size() == spec.parameter_count(), Err::DimensionMismatch,
          "parameter count mismatch");
  require(inputs.rows >= 1, Err::DimensionMismatch, "empty batch");
  check_targets(spec, inputs, targets);
  std::vector<double> grad(parameters.size(), 0.0);
  loss_and_gradient(spec, parameters.data(), inputs, targets, mode, grad.data());
  return grad;
}

double batch_loss(const NetworkSpec& spec, const std::vector<double>& parameters,
                  const Matrix& inputs, const Targets& targets, PassMode mode) {
  spec.validate();
  require(parameters.size() == spec.parameter_count(), Err::DimensionMismatch,
          "parameter count mismatch");
  require(inputs.rows >= 1, Err::DimensionMismatch, "empty batch");
  check_targets(spec, inputs, targets);
  return loss_and_gradient(spec, parameters.data(), inputs, targets, mode, nullptr);
}

Matrix predict_proba(const TrainedModel& model, const Matrix& inputs) {
  require(model.spec.head.kind == HeadKind::SoftmaxCrossEntropy, Err::WrongHead,
          "predict_proba needs a softmax head");
  Cache cache;
  forward(model.spec, model.parameters.data(), inputs, PassMode::eval(), cache);
  return softmax_rows(cache.acts.back());
}

std::vector<Matrix> mc_dropout_passes(const TrainedModel& model, const Matrix& inputs, int passes,
                                      std::uint64_t seed) {
  require(model.spec.head.kind == HeadKind::SoftmaxCrossEntropy, Err::WrongHead,
          "MC dropout needs a softmax head");
  require(passes >= 1, Err::InvalidArgument, "passes must be >= 1");
  std::vector<Matrix> out;
  out.reserve(passes);
  for (int t = 0; t < passes; ++t) {
    Cache cache;
    forward(model.spec, model.parameters.data(), inputs,
            PassMode::training(derive_seed(seed, 0xD0, static_cast<std::uint64_t>(t))), cache);
    out.push_back(softmax_rows(cache.acts.back()));
  }
  return out;
}

Matrix predict_proba(const TrainedModel& model, const Matrix& inputs, const McDropout& mc) {
  const auto passes = mc_dropout_passes(model, inputs, mc.passes, mc.seed);
  Matrix mean(inputs.rows, passes.front().cols);
  for (const Matrix& p : passes)
    for (std::size_t j = 0; j < mean.data.size(); ++j) mean.data[j] += p.data[j];
  for (double& v : mean.data) v /= passes.size();
  return mean;
}

std::vector<double> per_sample_loss(const TrainedModel& model, const Matrix& inputs,
                                    const Targets& targets) {
  check_targets(model.spec, inputs, targets);
  Cache cache;
  forward(model.spec, model.parameters.data(), inputs, PassMode::eval(), cache);
  return head_losses(model.spec, cache, targets);
}

VaeLossParts vae_loss_parts(const TrainedModel& model, const Matrix& inputs, const Matrix& targets) {
  require(model.spec.head.kind == HeadKind::GaussianVae, Err::WrongHead,
          "loss decomposition needs the gaussian-vae head");
  Cache cache;
  forward(model.spec, model.parameters.data(), inputs, PassMode::eval(), cache);
  const Matrix& out = cache.acts.back();
  VaeLossParts parts;
  parts.reconstruction.resize(out.rows);
  parts.kl.resize(out.rows);
  for (int i = 0; i < out.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < out.cols; ++j) {
      const double e = out(i, j) - targets(i, j);
      acc += e * e;
    }
    parts.reconstruction[i] = 0.5 * acc;
    parts.kl[i] = sample_kl(cache, i);
  }
  return parts;
}

Matrix embed(const TrainedModel& model, const Matrix& inputs) {
  int last_dense = -1;
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i)
    if (model.spec.layers[i].kind == LayerKind::Dense) last_dense = static_cast<int>(i);
  require(last_dense >= 0, Err::NoHiddenLayer, "network has no dense layer");
  Cache cache;
  forward(model.spec, model.parameters.data(), inputs, PassMode::eval(), cache);
  return cache.acts[last_dense];
}

std::vector<int> predict_labels(const TrainedModel& model, const Matrix& inputs) {
  const Matrix p = predict_proba(model, inputs);
  std::vector<int> labels(p.rows);
  for (int i = 0; i < p.rows; ++i) {
    int best = 0;
    for (int j = 1; j < p.cols; ++j)
      if (p(i, j) > p(i, best)) best = j;
    labels[i] = best;
  }
  return labels;
}

double accuracy(const TrainedModel& model, const Matrix& inputs, const std::vector<int>& labels) {
  require(static_cast<int>(labels.size()) == inputs.rows, Err::DimensionMismatch,
          "label count != row count");
  const auto predicted = predict_labels(model, inputs);
  int hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (predicted[i] == labels[i]) ++hits;
  return double(hits) / labels.size();
}

void save_model(const TrainedModel& model, const std::string& path) {
  nlohmann::json j;
  j["schema"] = "poolseed.model.v1";
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : model.spec.layers) {
    layers.push_back({{"kind", layer_name(l.kind)}, {"in", l.in}, {"out", l.out}, {"rate", l.rate}});
  }
  j["layers"] = layers;
  j["head"] = {{"kind", head_name(model.spec.head.kind)},
               {"latent_dim", model.spec.head.latent_dim}};
  j["parameters"] = model.parameters;
  nlohmann::json log = nlohmann::json::array();
  for (const EpochLog& e : model.train_log) {
    nlohmann::json entry;
    entry["train_loss"] = e.train_loss;
    if (std::isfinite(e.val_loss))
      entry["val_loss"] = e.val_loss;
    else
      entry["val_loss"] = nullptr;
    log.push_back(entry);
  }
  j["train_log"] = log;
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << j.dump();
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Err::IoFailure, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ConfigParse, path + ": " + e.what());
  }
  require(j.value("schema", "") == "poolseed.model.v1", Err::ConfigParse,
          path + ": unknown checkpoint schema");
  TrainedModel model;
  for (const auto& lj : j.at("layers")) {
    Layer l;
    const std::string kind = lj.at("kind").get<std::string>();
    if (kind == "dense") l.kind = LayerKind::Dense;
    else if (kind == "relu") l.kind = LayerKind::Relu;
    else if (kind == "dropout") l.kind = LayerKind::Dropout;
    else if (kind == "reshape") l.kind = LayerKind::Reshape;
    else if (kind == "latent") l.kind = LayerKind::Latent;
    else fail(Err::ConfigParse, path + ": unknown layer kind " + kind);
    l.in = lj.at("in").get<int>();
    l.out = lj.at("out").get<int>();
    l.rate = lj.at("rate").get<double>();
    model.spec.layers.push_back(l);
  }
  const std::string head = j.at("head").at("kind").get<std::string>();
  if (head == "softmax_ce") model.spec.head.kind = HeadKind::SoftmaxCrossEntropy;
  else if (head == "mse") model.spec.head.kind = HeadKind::MeanSquaredError;
  else if (head == "gaussian_vae") model.spec.head.kind = HeadKind::GaussianVae;
  else fail(Err::ConfigParse, path + ": unknown head kind " + head);
  model.spec.head.latent_dim = j.at("head").at("latent_dim").get<int>();
  model.spec.validate();
  model.parameters = j.at("parameters").get<std::vector<double>>();
  require(model.parameters.size() == model.spec.parameter_count(), Err::DimensionMismatch,
          path + ": parameter count does not match spec");
  for (const auto& ej : j.at("train_log")) {
    EpochLog e;
    e.train_loss = ej.at("train_loss").get<double>();
    e.val_loss = ej.at("val_loss").is_null() ? kNaN : ej.at("val_loss").get<double>();
    model.train_log.push_back(e);
  }
  return model;
}

}  // namespace poolseed::nn
