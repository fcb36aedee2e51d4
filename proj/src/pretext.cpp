#include "poolseed/pretext.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "poolseed/error.hpp"
#include "poolseed/rng.hpp"

namespace poolseed::pretext {

namespace {

bool needs_image(TaskKind kind) {
  return kind == TaskKind::Rotation4 || kind == TaskKind::MaskedReconstruction;
}

}  // namespace

std::string PretextTask::name() const {
  switch (kind) {
    case TaskKind::Rotation4: return "rotation4";
    case TaskKind::MaskedReconstruction:
      return "masked_reconstruction(" + std::to_string(mask_size) + ")";
    case TaskKind::Autoencoder: return "autoencoder";
    case TaskKind::Vae: return "vae(" + std::to_string(latent_dim) + ")";
  }
  return "?";
}

void PretextTask::validate(const DataTable& table) const {
  if (needs_image(kind)) {
    require(table.image_shape.has_value(), Err::NotAnImage, name() + " needs image-shaped data");
    const auto& s = *table.image_shape;
    if (kind == TaskKind::Rotation4)
      require(s.height == s.width, Err::NotAnImage, "rotation needs square images");
    if (kind == TaskKind::MaskedReconstruction) {
      require(mask_size >= 1, Err::InvalidArgument, "mask size must be >= 1");
      require(mask_size < s.height && mask_size < s.width, Err::MaskTooLarge,
              "mask " + std::to_string(mask_size) + " does not fit in " +
                  std::to_string(s.height) + "x" + std::to_string(s.width));
    }
  }
  if (kind == TaskKind::Vae)
    require(latent_dim >= 1, Err::InvalidArgument, "latent_dim must be >= 1");
}

void rotate_square_image(const double* src, double* dst, int side, int channels, int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      int sy = y, sx = x;
      switch (q) {
        case 1: sy = side - 1 - x; sx = y; break;          // 90 degrees clockwise
        case 2: sy = side - 1 - y; sx = side - 1 - x; break;
        case 3: sy = x; sx = side - 1 - y; break;
      }
      for (int c = 0; c < channels; ++c)
        dst[(y * side + x) * channels + c] = src[(sy * side + sx) * channels + c];
    }
  }
}

TaskDataset build_task_dataset(const PretextTask& task, const DataTable& table,
                               const std::vector<int>& indices, std::uint64_t seed) {
  (void)seed;  // current task kinds are deterministic constructions
  task.validate(table);
  for (int i : indices)
    require(i >= 0 && i < table.rows(), Err::IndexOutOfRange, "pool index out of range");

  const int n = static_cast<int>(indices.size());
  const int d = table.cols();
  TaskDataset out;

  switch (task.kind) {
    case TaskKind::Rotation4: {
      const int side = table.image_shape->height;
      const int channels = table.image_shape->channels;
      out.copies_per_sample = 4;
      out.inputs = Matrix(4 * n, d);
      std::vector<int> labels(4 * n);
      for (int i = 0; i < n; ++i) {
        const double* src = table.features.row(indices[i]);
        for (int r = 0; r < 4; ++r) {
          rotate_square_image(src, out.inputs.row(4 * i + r), side, channels, r);
          labels[4 * i + r] = r;
        }
      }
      out.targets = std::move(labels);
      break;
    }
    case TaskKind::MaskedReconstruction: {
      const auto& s = *table.image_shape;
      out.inputs = gather_rows(table.features, indices);
      Matrix targets = out.inputs;
      const int y0 = (s.height - task.mask_size) / 2;
      const int x0 = (s.width - task.mask_size) / 2;
      for (int i = 0; i < n; ++i) {
        double* px = out.inputs.row(i);
        for (int y = y0; y < y0 + task.mask_size; ++y)
          for (int x = x0; x < x0 + task.mask_size; ++x)
            for (int c = 0; c < s.channels; ++c) px[(y * s.width + x) * s.channels + c] = 0.0;
      }
      out.targets = std::move(targets);
      break;
    }
    case TaskKind::Autoencoder:
    case TaskKind::Vae: {
      out.inputs = gather_rows(table.features, indices);
      out.targets = out.inputs;
      break;
    }
  }
  return out;
}

nn::NetworkSpec pretext_spec(const PretextTask& task, int input_dim,
                             const PretextTrainConfig& config) {
  switch (task.kind) {
    case TaskKind::Rotation4:
      return nn::mlp_classifier(input_dim, config.classifier_hidden, 4, config.classifier_dropout);
    case TaskKind::MaskedReconstruction:
    case TaskKind::Autoencoder:
      return nn::autoencoder(input_dim, config.autoencoder_hidden);
    case TaskKind::Vae:
      return nn::vae(input_dim, config.vae_encoder_width, task.latent_dim);
  }
  fail(Err::InvalidArgument, "unknown pretext task");
}

nn::TrainedModel train_pretext(const PretextTask& task, const DataTable& table,
                               const std::vector<int>& unlabeled_indices,
                               const PretextTrainConfig& config, std::uint64_t seed) {
  require(!unlabeled_indices.empty(), Err::EmptyInput, "unlabeled pool is empty");
  const TaskDataset ds = build_task_dataset(task, table, unlabeled_indices, seed);
  const nn::NetworkSpec spec = pretext_spec(task, table.cols(), config);
  return nn::train(spec, ds.inputs, ds.targets, config.adam, std::nullopt, seed);
}

namespace {

void check_task_model(const PretextTask& task, const nn::TrainedModel& model, int feature_dim) {
  const auto& head = model.spec.head;
  switch (task.kind) {
    case TaskKind::Rotation4:
      require(head.kind == nn::HeadKind::SoftmaxCrossEntropy && model.spec.output_dim() == 4,
              Err::TaskModelMismatch, "rotation scoring needs a 4-class softmax model");
      break;
    case TaskKind::MaskedReconstruction:
    case TaskKind::Autoencoder:
      require(head.kind == nn::HeadKind::MeanSquaredError &&
                  model.spec.output_dim() == feature_dim,
              Err::TaskModelMismatch, "reconstruction scoring needs an mse model");
      break;
    case TaskKind::Vae:
      require(head.kind == nn::HeadKind::GaussianVae && model.spec.output_dim() == feature_dim,
              Err::TaskModelMismatch, "vae scoring needs a gaussian-vae model");
      break;
  }
  require(model.spec.input_dim() == feature_dim, Err::TaskModelMismatch,
          "model input width != feature width");
}

}  // namespace

ScoreVector score_pool(const PretextTask& task, const nn::TrainedModel& model,
                       const DataTable& table, const std::vector<int>& unlabeled_indices) {
  check_task_model(task, model, table.cols());
  const TaskDataset ds = build_task_dataset(task, table, unlabeled_indices, 0);
  const std::vector<double> losses = nn::per_sample_loss(model, ds.inputs, ds.targets);

  ScoreVector out;
  out.indices = unlabeled_indices;
  out.task = task.name();
  out.model_fingerprint = model.fingerprint();
  const int copies = ds.copies_per_sample;
  out.scores.resize(unlabeled_indices.size());
  for (std::size_t i = 0; i < unlabeled_indices.size(); ++i) {
    double acc = 0.0;
    for (int r = 0; r < copies; ++r) acc += losses[i * copies + r];
    out.scores[i] = acc / copies;
  }
  return out;
}

void save_scores_csv(const ScoreVector& scores, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Err::IoFailure, "cannot write " + path);
  out << "index,score\n";
  char buf[32];
  for (std::size_t i = 0; i < scores.indices.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", scores.scores[i]);
    out << scores.indices[i] << "," << buf << "\n";
  }
  require(out.good(), Err::IoFailure, "write failed: " + path);
}

}  // namespace poolseed::pretext
