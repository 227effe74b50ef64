#pragma once

#include <torch/torch.h>

#include "lmk/common.hpp"

namespace lmk {

/// Similarity transform (scale, rotation, translation) acting about the image
/// center, in input-image pixel units. A(p) = s R(theta) (p - c) + c + t.
struct SimilarityTransform {
  double scale = 1.0;
  double theta = 0.0;  // radians
  double tx = 0.0;
  double ty = 0.0;
  int64_t width = kImageSize;
  int64_t height = kImageSize;

  static SimilarityTransform identity(int64_t w = kImageSize, int64_t h = kImageSize) {
    return SimilarityTransform{1.0, 0.0, 0.0, 0.0, w, h};
  }

  bool is_identity() const { return scale == 1.0 && theta == 0.0 && tx == 0.0 && ty == 0.0; }

  /// 2x3 row-major affine matrix equivalent to this transform.
  std::array<double, 6> matrix() const;

  /// Closed-form inverse; stays within the similarity family.
  SimilarityTransform inverse() const;
};

/// Uniform, independent parameter ranges for sample_transform.
struct TransformRanges {
  double scale_lo = 0.9;
  double scale_hi = 1.1;
  double theta_max = 15.0 * M_PI / 180.0;
  double translate_max = 0.1 * kImageSize;

  static TransformRanges collapsed() { return TransformRanges{1.0, 1.0, 0.0, 0.0}; }
};

SimilarityTransform sample_transform(const TransformRanges& ranges, Rng& rng);

/// Bilinear warp with edge replication; warp(x, identity) returns x exactly.
torch::Tensor warp(const torch::Tensor& image, const SimilarityTransform& t);

/// Warp a batch, one transform per image.
torch::Tensor warp_batch(const torch::Tensor& images,
                         const std::vector<SimilarityTransform>& ts);

/// Exact affine application to (..., 2) points in pixel units. Math runs in
/// double precision; output dtype matches the input.
torch::Tensor transform_points(const torch::Tensor& points, const SimilarityTransform& t);

}  // namespace lmk
