#pragma once

#include <torch/torch.h>

#include <map>
#include <string>
#include <vector>

#include "lmk/adapters.hpp"
#include "lmk/bottleneck.hpp"
#include "lmk/common.hpp"

namespace lmk {

/// Detector hyper-parameters. The reference preset matches the parameter
/// accounting the paper reports; the desk preset is sized for CPU training
/// in the tests and example configs.
struct DetectorConfig {
  int64_t K = 10;
  int64_t stem_channels = 64;   // 7x7 stem conv output
  int64_t trunk_channels = 160; // hourglass width
  int64_t hg_levels = 4;        // down/up levels
  bool projected = false;       // proposed regime: frozen cores + adapters

  static DetectorConfig reference(int64_t K = 10, bool projected = false);
  static DetectorConfig desk(int64_t K = 10, bool projected = false);

  std::string serialize() const;
  static DetectorConfig deserialize(const std::string& s);
};

enum class DetectMode { argmax, softargmax };

/// Pre-activation residual block of two 3x3 convs; 1x1 projection skip when
/// the channel count changes.
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int64_t in, int64_t out, bool projected);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  ProjectedConv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
};
TORCH_MODULE(ResidualBlock);

class HourglassImpl : public torch::nn::Module {
 public:
  HourglassImpl(int64_t levels, int64_t channels, bool projected);
  torch::Tensor forward(torch::Tensor x);

  ResidualBlock up1{nullptr}, low1{nullptr}, low3{nullptr}, inner{nullptr};
  std::shared_ptr<HourglassImpl> low2{nullptr};
  torch::nn::MaxPool2d pool{nullptr};
};
TORCH_MODULE(Hourglass);

/// Hourglass landmark detector: 128x128 RGB in, K raw 32x32 heatmaps out.
/// In projected mode every trunk convolution is a frozen core kernel behind a
/// trainable adapter; the heatmap head is always a plain trainable conv.
class LandmarkDetectorImpl : public torch::nn::Module {
 public:
  explicit LandmarkDetectorImpl(DetectorConfig cfg);

  torch::Tensor forward(torch::Tensor images);

  /// Forward + bottleneck read-out, coordinates in heatmap-grid units.
  LandmarkSet detect(const torch::Tensor& images, DetectMode mode = DetectMode::softargmax,
                     double beta = kDefaultBeta);

  const DetectorConfig& config() const { return cfg_; }

  /// All trunk convolutions in definition order, as (layer_id, module).
  std::vector<std::pair<std::string, ProjectedConv2d>> conv_layers() const;

  /// Effective per-layer kernels: adapter x core for projected layers, the
  /// plain weight otherwise. The head is not included.
  std::map<std::string, ConvKernel> effective_kernels() const;

  /// Install trunk weights (and batch-norm state) from another detector's
  /// state. In projected mode the trunk lands in the frozen core buffers and
  /// adapters reset to identity. The head is freshly initialized unless
  /// copy_head is set (requires matching K).
  void load_core(const std::map<std::string, torch::Tensor>& core_weights,
                 const std::map<std::string, torch::Tensor>& norm_state,
                 const std::map<std::string, torch::Tensor>& head_state, bool copy_head);

  torch::nn::Conv2d head{nullptr};

 private:
  DetectorConfig cfg_;
  ProjectedConv2d stem_conv{nullptr};
  torch::nn::BatchNorm2d stem_bn{nullptr};
  ResidualBlock stem_res{nullptr};
  torch::nn::MaxPool2d stem_pool{nullptr};
  Hourglass hg{nullptr};
  ProjectedConv2d post_conv{nullptr};
  torch::nn::BatchNorm2d post_bn{nullptr};
};
TORCH_MODULE(LandmarkDetector);

/// Operator-facing detection on a single image or a batch.
LandmarkSet detect(LandmarkDetector& model, const torch::Tensor& image,
                   DetectMode mode = DetectMode::softargmax, double beta = kDefaultBeta);

}  // namespace lmk
