#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poolseed/dataset.hpp"
#include "poolseed/nn.hpp"

namespace poolseed::pretext {

enum class TaskKind { Rotation4, MaskedReconstruction, Autoencoder, Vae };

struct PretextTask {
  TaskKind kind = TaskKind::Autoencoder;
  int mask_size = 8;    // masked reconstruction: centered mask edge length
  int latent_dim = 16;  // vae

  std::string name() const;
  void validate(const DataTable& table) const;
};

// Supervisable dataset derived from unlabeled rows. Rotation targets are
// class labels (4 copies per sample, sample-major); the rest are matrices.
struct TaskDataset {
  Matrix inputs;
  nn::Targets targets;
  int copies_per_sample = 1;
};

TaskDataset build_task_dataset(const PretextTask& task, const DataTable& table,
                               const std::vector<int>& indices, std::uint64_t seed);

struct PretextTrainConfig {
  nn::AdamConfig adam{5e-4, 5e-4, 0.9, 0.999, 1e-8, 64, 12, 0};
  std::vector<int> classifier_hidden{256, 128};
  double classifier_dropout = 0.25;
  std::vector<int> autoencoder_hidden{256, 64};
  int vae_encoder_width = 256;
};

nn::NetworkSpec pretext_spec(const PretextTask& task, int input_dim,
                             const PretextTrainConfig& config);

nn::TrainedModel train_pretext(const PretextTask& task, const DataTable& table,
                               const std::vector<int>& unlabeled_indices,
                               const PretextTrainConfig& config, std::uint64_t seed);

struct ScoreVector {
  std::vector<int> indices;    // scored pool, caller order
  std::vector<double> scores;  // aligned with indices
  std::string task;
  std::uint64_t model_fingerprint = 0;
};

// Per-sample task loss over the pool; rotation scores average the sample's
// four rotated copies, vae scores are the negative per-sample ELBO.
ScoreVector score_pool(const PretextTask& task, const nn::TrainedModel& model,
                       const DataTable& table, const std::vector<int>& unlabeled_indices);

void save_scores_csv(const ScoreVector& scores, const std::string& path);

// Exact 90-degree rotation (index permutation); square images only.
void rotate_square_image(const double* src, double* dst, int side, int channels, int quarter_turns);

}  // namespace poolseed::pretext
