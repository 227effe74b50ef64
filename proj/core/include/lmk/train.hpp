#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lmk/checkpoint.hpp"
#include "lmk/dataset.hpp"
#include "lmk/losses.hpp"

namespace lmk {

struct TrainingConfig {
  Regime regime = Regime::pretrain;
  int64_t K = 10;
  int64_t epochs = 20;
  int64_t iters_per_epoch = 200;
  int64_t batch_size = 16;
  double lr = 1e-4;
  double decay_factor = 0.1;
  int64_t decay_every = 30;
  double beta1 = 0.0;
  double beta2 = 0.9;
  uint64_t seed = 0;
  double pixel_weight = 1.0;
  double perceptual_weight = 1.0;
  std::vector<int> perceptual_layers = {0, 1, 2, 3};
  std::string vgg_weights;
  int64_t workers = 1;
  int64_t checkpoint_every = 5;  // epochs

  void validate() const;
};

/// Step schedule: lr(epoch) = lr * decay_factor ^ floor(epoch / decay_every).
double lr_at_epoch(const TrainingConfig& cfg, int64_t epoch);

struct RunPaths {
  std::string run_dir;
  std::string log_csv;
  std::string latest_checkpoint;
  std::string manifest;
};

struct TrainResult {
  RunPaths paths;
  double final_loss = 0.0;
  double holdout_error_px = -1.0;  // pretraining only
  int64_t steps = 0;
};

struct RunConfig;  // config.hpp

/// Supervised core pretraining by heatmap regression on an annotated dataset.
TrainResult pretrain_core(const Dataset& train, const Dataset* holdout, const RunConfig& cfg,
                          const std::string& run_dir);

/// Unsupervised adaptation under scratch / finetune / proposed. `core` is
/// required for finetune and proposed, ignored by scratch.
TrainResult adapt(const Checkpoint* core, const Dataset& unlabeled, const RunConfig& cfg,
                  const std::string& run_dir, bool resume = false);

}  // namespace lmk
