#include "lmk/bottleneck.hpp"

namespace lmk {

void HeatmapStack::validate() const {
  if (maps.dim() != 3 && maps.dim() != 4) {
    throw ShapeError("HeatmapStack must be (K,H,W) or (B,K,H,W)");
  }
  if (!maps.isfinite().all().item<bool>()) {
    throw std::invalid_argument("HeatmapStack has non-finite entries");
  }
  if (kind == HeatmapKind::gaussian) {
    auto per_channel_max = std::get<0>(maps.flatten(-2).max(-1));
    if ((per_channel_max > 1.0 + 1e-5).any().item<bool>() ||
        (per_channel_max <= 0.0).any().item<bool>()) {
      throw std::invalid_argument("gaussian-kind maps must have per-channel max in (0, 1]");
    }
  }
}

torch::Tensor softargmax_xy(const torch::Tensor& maps, double beta) {
  if (maps.dim() < 3) throw ShapeError("softargmax expects (..., K, H, W)");
  const int64_t h = maps.size(-2), w = maps.size(-1);
  auto probs = torch::softmax(maps.flatten(-2) * beta, -1);  // (..., K, H*W)
  auto opts = maps.options().requires_grad(false);
  auto us = torch::arange(w, opts).repeat({h});                    // row-major u
  auto vs = torch::arange(h, opts).repeat_interleave(w);           // row-major v
  auto u = (probs * us).sum(-1);
  auto v = (probs * vs).sum(-1);
  return torch::stack({u, v}, -1);  // (..., K, 2)
}

LandmarkSet softargmax(const HeatmapStack& maps, double beta) {
  return LandmarkSet{softargmax_xy(maps.maps, beta)};
}

torch::Tensor render_gaussians_xy(const torch::Tensor& points, double sigma_sq,
                                  int64_t height, int64_t width) {
  if (points.dim() < 2 || points.size(-1) != 2) {
    throw ShapeError("render_gaussians expects (..., K, 2) points");
  }
  auto opts = torch::TensorOptions().dtype(points.dtype());
  auto gx = torch::arange(width, opts).view({1, -1});   // (1, W)
  auto gy = torch::arange(height, opts).view({-1, 1});  // (H, 1)
  auto u = points.select(-1, 0).unsqueeze(-1).unsqueeze(-1);  // (..., K, 1, 1)
  auto v = points.select(-1, 1).unsqueeze(-1).unsqueeze(-1);
  auto d2 = (gx - u).pow(2) + (gy - v).pow(2);
  return torch::exp(-d2 / sigma_sq);
}

HeatmapStack render_gaussians(const LandmarkSet& landmarks, double sigma_sq,
                              int64_t height, int64_t width, torch::Tensor* clamped_flags) {
  auto pts = landmarks.points;
  auto u = pts.select(-1, 0), v = pts.select(-1, 1);
  auto oob = (u < 0) | (u > width - 1) | (v < 0) | (v > height - 1);
  if (clamped_flags) *clamped_flags = oob;
  if (oob.any().item<bool>()) {
    auto lo = torch::zeros({2}, pts.options());
    auto hi = torch::tensor({double(width - 1), double(height - 1)}, pts.options());
    pts = torch::min(torch::max(pts, lo), hi);
  }
  return HeatmapStack{render_gaussians_xy(pts, sigma_sq, height, width), HeatmapKind::gaussian};
}

LandmarkSet hard_argmax(const HeatmapStack& maps) {
  const int64_t w = maps.width();
  // torch::argmax documents first-occurrence on ties, which is exactly the
  // smallest row-major index on the flattened grid.
  auto idx = maps.maps.flatten(-2).argmax(-1);  // (..., K)
  auto u = (idx % w).to(torch::kFloat32);
  auto v = idx.div(w, "floor").to(torch::kFloat32);
  return LandmarkSet{torch::stack({u, v}, -1)};
}

}  // namespace lmk
