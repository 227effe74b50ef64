#pragma once

#include <torch/torch.h>

#include "lmk/common.hpp"

namespace lmk {

enum class HeatmapKind { raw, gaussian };

/// K heatmaps. `raw` is unconstrained detector output; `gaussian` is the
/// re-rendered bottleneck form the generator is allowed to see.
/// maps is (K, H, W) or batched (B, K, H, W).
struct HeatmapStack {
  torch::Tensor maps;
  HeatmapKind kind = HeatmapKind::raw;

  int64_t channels() const { return maps.size(-3); }
  int64_t height() const { return maps.size(-2); }
  int64_t width() const { return maps.size(-1); }
  void validate() const;
};

/// K landmark coordinates in heatmap-grid units, (u, v) = (column, row).
/// points is (K, 2) or batched (B, K, 2).
struct LandmarkSet {
  torch::Tensor points;

  int64_t count() const { return points.size(-2); }
};

/// Differentiable spatial soft-argmax: per channel, softmax(beta * map) over
/// the grid, then the probability-weighted expected (u, v).
LandmarkSet softargmax(const HeatmapStack& maps, double beta = kDefaultBeta);
torch::Tensor softargmax_xy(const torch::Tensor& maps, double beta = kDefaultBeta);

/// Re-render landmarks as Gaussian heatmaps on the integer grid:
/// H_k(u, v) = exp(-(1/sigma^2) * ||(u,v) - (u_k,v_k)||^2).
/// Out-of-grid landmarks are clamped; `clamped_flags` (when given) receives a
/// boolean (..., K) mask of clamped points so callers can exclude them.
HeatmapStack render_gaussians(const LandmarkSet& landmarks,
                              double sigma_sq = kDefaultSigmaSq,
                              int64_t height = kHeatmapSize, int64_t width = kHeatmapSize,
                              torch::Tensor* clamped_flags = nullptr);
torch::Tensor render_gaussians_xy(const torch::Tensor& points, double sigma_sq,
                                  int64_t height, int64_t width);

/// Integer-grid argmax per channel; ties resolved to the smallest row-major
/// index (v * W + u).
LandmarkSet hard_argmax(const HeatmapStack& maps);

}  // namespace lmk
