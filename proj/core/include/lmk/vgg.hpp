#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

namespace lmk {

/// Fixed feature extractor with VGG-19 convolution topology. Weights are an
/// external asset loaded from a file and never trained here; a missing or
/// malformed file is a startup error.
///
/// Weight file format (versioned, little-endian):
///   magic "LMKVGG1\n", int32 n_convs, then per conv:
///   int32 c_out, int32 c_in, float32 weight[c_out*c_in*3*3], float32 bias[c_out].
/// Convolution i (1-based) is followed by ReLU; 2x2 max-pooling sits after
/// convs {2, 4, 8, 12, 16}. Files may stop after conv 11 (the deepest tap).
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const std::string& weights_path);

  /// Activations at relu1_2, relu2_2, relu3_3, relu4_3 for a [0,1] RGB batch.
  /// Inputs are normalized to the extractor's channel statistics internally.
  std::vector<torch::Tensor> features(const torch::Tensor& images) const;

  static constexpr std::array<int, 4> kTapConvs = {2, 4, 7, 11};  // 1-based conv indices
  static constexpr std::array<int, 5> kPoolAfter = {2, 4, 8, 12, 16};

  int64_t conv_count() const { return static_cast<int64_t>(weights_.size()); }

 private:
  std::vector<torch::Tensor> weights_;
  std::vector<torch::Tensor> biases_;
  torch::Tensor mean_, std_;
};

enum class VggPreset { vgg19, vgg19_slim };

/// Write a weight file with VGG-19 topology and seeded random filters. Used
/// to synthesize the fixed extractor asset when converted classifier weights
/// are not available; the file format is identical either way.
void write_vgg_weights(const std::string& path, VggPreset preset, uint64_t seed);

}  // namespace lmk
