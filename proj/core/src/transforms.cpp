#include "lmk/transforms.hpp"

#include <cmath>

namespace lmk {

std::array<double, 6> SimilarityTransform::matrix() const {
  const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
  const double a = scale * std::cos(theta), b = -scale * std::sin(theta);
  const double c = scale * std::sin(theta), d = scale * std::cos(theta);
  // A(p) = M (p - c) + c + t
  return {a, b, cx + tx - (a * cx + b * cy),
          c, d, cy + ty - (c * cx + d * cy)};
}

SimilarityTransform SimilarityTransform::inverse() const {
  const double inv_s = 1.0 / scale;
  const double ct = std::cos(-theta), st = std::sin(-theta);
  // A^-1(q) = (1/s) R(-theta) (q - c) + c - (1/s) R(-theta) t
  return SimilarityTransform{inv_s, -theta,
                             -inv_s * (ct * tx - st * ty),
                             -inv_s * (st * tx + ct * ty),
                             width, height};
}

SimilarityTransform sample_transform(const TransformRanges& r, Rng& rng) {
  if (r.scale_lo > r.scale_hi || r.scale_lo <= 0.0 || r.theta_max < 0.0 || r.translate_max < 0.0) {
    throw ConfigError("sample_transform: empty or invalid parameter range");
  }
  std::uniform_real_distribution<double> ds(r.scale_lo, r.scale_hi);
  std::uniform_real_distribution<double> dt(-r.theta_max, r.theta_max);
  std::uniform_real_distribution<double> dx(-r.translate_max, r.translate_max);
  SimilarityTransform t;
  t.scale = ds(rng);
  t.theta = r.theta_max == 0.0 ? 0.0 : dt(rng);
  t.tx = r.translate_max == 0.0 ? 0.0 : dx(rng);
  t.ty = r.translate_max == 0.0 ? 0.0 : dx(rng);
  return t;
}

namespace {

// Normalized sampling grid realizing image(q) <- image(A^-1 q), (1, H, W, 2).
torch::Tensor sampling_grid(const SimilarityTransform& t) {
  const auto inv = t.inverse().matrix();
  const int64_t h = t.height, w = t.width;
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto ox = torch::arange(w, opts).view({1, -1});
  auto oy = torch::arange(h, opts).view({-1, 1});
  auto px = inv[0] * ox + inv[1] * oy + inv[2];
  auto py = inv[3] * ox + inv[4] * oy + inv[5];
  auto nx = px * (2.0 / (w - 1)) - 1.0;
  auto ny = py * (2.0 / (h - 1)) - 1.0;
  return torch::stack({nx, ny}, -1).unsqueeze(0).to(torch::kFloat32);
}

torch::Tensor grid_warp(const torch::Tensor& batch, const torch::Tensor& grid) {
  namespace F = torch::nn::functional;
  return F::grid_sample(batch, grid,
                        F::GridSampleFuncOptions()
                            .mode(torch::kBilinear)
                            .padding_mode(torch::kBorder)
                            .align_corners(true));
}

}  // namespace

torch::Tensor warp(const torch::Tensor& image, const SimilarityTransform& t) {
  if (image.dim() != 3) throw ShapeError("warp expects a (C, H, W) image");
  if (t.is_identity()) return image.clone();
  return grid_warp(image.unsqueeze(0), sampling_grid(t)).squeeze(0);
}

torch::Tensor warp_batch(const torch::Tensor& images,
                         const std::vector<SimilarityTransform>& ts) {
  if (images.dim() != 4) throw ShapeError("warp_batch expects (B, C, H, W)");
  if (images.size(0) != static_cast<int64_t>(ts.size())) {
    throw ShapeError("warp_batch: one transform per image required");
  }
  std::vector<torch::Tensor> grids;
  grids.reserve(ts.size());
  for (const auto& t : ts) grids.push_back(sampling_grid(t));
  return grid_warp(images, torch::cat(grids, 0));
}

torch::Tensor transform_points(const torch::Tensor& points, const SimilarityTransform& t) {
  if (points.size(-1) != 2) throw ShapeError("transform_points expects (..., 2)");
  const auto m = t.matrix();
  auto p = points.to(torch::kFloat64);
  auto x = p.select(-1, 0), y = p.select(-1, 1);
  auto qx = m[0] * x + m[1] * y + m[2];
  auto qy = m[3] * x + m[4] * y + m[5];
  return torch::stack({qx, qy}, -1).to(points.dtype());
}

}  // namespace lmk
