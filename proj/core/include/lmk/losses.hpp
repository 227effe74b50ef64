#pragma once

#include <torch/torch.h>

#include "lmk/bottleneck.hpp"
#include "lmk/detector.hpp"
#include "lmk/generator.hpp"
#include "lmk/vgg.hpp"

namespace lmk {

/// Mean squared error between predicted raw heatmaps and Gaussian targets.
torch::Tensor supervised_loss(const HeatmapStack& pred, const HeatmapStack& target);

/// Mean squared error between two images (or batches).
torch::Tensor pixel_loss(const torch::Tensor& recon, const torch::Tensor& target);

/// Sum over the extractor's tap layers of the mean absolute feature
/// difference. `layers` selects a subset of the four taps (default: all).
torch::Tensor perceptual_loss(const torch::Tensor& recon, const torch::Tensor& target,
                              const FeatureExtractor& fx,
                              const std::vector<int>& layers = {0, 1, 2, 3});

struct TotalLossOptions {
  double beta = kDefaultBeta;
  double sigma_sq = kDefaultSigmaSq;
  double pixel_weight = 1.0;
  double perceptual_weight = 1.0;
  std::vector<int> perceptual_layers = {0, 1, 2, 3};
};

struct TotalLossParts {
  torch::Tensor total;
  torch::Tensor pixel;
  torch::Tensor perceptual;
  torch::Tensor reconstruction;  // generator output, for inspection
  LandmarkSet landmarks;         // bottleneck coordinates
};

/// Reconstruction objective with the bottleneck enforced: the generator only
/// ever sees render_gaussians(softargmax(detector(y))).
TotalLossParts total_loss(const torch::Tensor& y, const torch::Tensor& y_prime,
                          LandmarkDetector& detector, GeneratorNet& generator,
                          const FeatureExtractor& fx, const TotalLossOptions& opts = {});

}  // namespace lmk
