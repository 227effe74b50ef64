#pragma once

#include <torch/torch.h>

#include "lmk/bottleneck.hpp"
#include "lmk/common.hpp"

namespace lmk {

struct GeneratorConfig {
  int64_t K = 10;
  int64_t features = 256;  // encoder output channels
  int64_t blocks = 6;      // residual blocks on features + heatmaps

  static GeneratorConfig reference(int64_t K = 10) { return GeneratorConfig{K, 256, 6}; }
  static GeneratorConfig desk(int64_t K = 10) { return GeneratorConfig{K, 64, 6}; }

  std::string serialize() const;
  static GeneratorConfig deserialize(const std::string& s);
};

class GenResBlockImpl : public torch::nn::Module {
 public:
  explicit GenResBlockImpl(int64_t channels);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
};
TORCH_MODULE(GenResBlock);

/// Conditional image generator: encodes the deformed image with two stride-2
/// convolutions, concatenates the Gaussian heatmaps to the downsampled
/// features, runs residual blocks, and upsamples back to a [0,1] RGB image.
class GeneratorNetImpl : public torch::nn::Module {
 public:
  explicit GeneratorNetImpl(GeneratorConfig cfg);

  torch::Tensor forward(const torch::Tensor& deformed, const torch::Tensor& cond_maps);

  const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  torch::nn::Conv2d enc1{nullptr}, enc2{nullptr}, dec1{nullptr}, dec2{nullptr}, out{nullptr};
  torch::nn::BatchNorm2d enc1_bn{nullptr}, enc2_bn{nullptr}, dec1_bn{nullptr}, dec2_bn{nullptr};
  torch::nn::ModuleList blocks;
};
TORCH_MODULE(GeneratorNet);

/// The only entry point to the generator during training: refuses raw-kind
/// conditioning so the bottleneck cannot be bypassed.
torch::Tensor generate(GeneratorNet& gen, const torch::Tensor& deformed,
                       const HeatmapStack& cond);

}  // namespace lmk
