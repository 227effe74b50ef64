#pragma once

#include <torch/torch.h>

#include <optional>
#include <string>
#include <vector>

#include "lmk/common.hpp"
#include "lmk/toy.hpp"
#include "lmk/transforms.hpp"

namespace lmk {

/// One dataset record. Annotations are (M, 2) pixel coordinates and may be
/// empty (unlabeled data used for unsupervised adaptation).
struct AnnotatedSample {
  std::string id;
  torch::Tensor image;        // (3, 128, 128) float [0,1]
  torch::Tensor annotations;  // (M, 2) float64, possibly empty
  std::string split;
};

/// In-memory dataset. Images are stored as uint8 and converted on access.
class Dataset {
 public:
  Dataset() = default;

  static Dataset from_toy(const std::vector<ToySample>& samples, std::string split);

  /// Load root/<split>/{images/*.ppm, annotations.csv}.
  static Dataset load(const std::string& root, const std::string& split);

  int64_t size() const { return static_cast<int64_t>(ids_.size()); }
  const std::string& split() const { return split_; }
  const std::vector<std::string>& ids() const { return ids_; }
  int64_t points_per_sample() const;
  bool annotated() const;

  AnnotatedSample get(int64_t index) const;
  torch::Tensor image(int64_t index) const;        // (3,128,128) float
  torch::Tensor annotations(int64_t index) const;  // (M,2) float64

  /// Throws unless the two datasets have disjoint id sets.
  static void require_disjoint(const Dataset& a, const Dataset& b);

 private:
  std::string split_;
  std::vector<std::string> ids_;
  std::vector<torch::Tensor> images_u8_;
  std::vector<torch::Tensor> annotations_;
};

enum class PairMode { warp, temporal };

/// A (target, deformed) training pair. In warp mode y_prime == warp(y, a)
/// exactly (up to interpolation); in temporal mode the transform records the
/// augmentation applied to y_prime only.
struct TrainingPair {
  torch::Tensor y;
  torch::Tensor y_prime;
  SimilarityTransform a;
  PairMode mode = PairMode::warp;
  bool flipped = false;
};

/// Warp-mode pair synthesis: the target receives its own augmentation draw,
/// then the deformed view is a second, independent similarity warp of it.
TrainingPair make_pair(const torch::Tensor& image, const TransformRanges& ranges, Rng& rng);

/// An ordered sequence of frames (video mode).
struct Clip {
  std::vector<torch::Tensor> frames;
};

/// Temporal pair: y' is a frame within +-window of the anchor (the window
/// shrinks at clip edges and never fails); optional synchronized horizontal
/// flip; both frames receive independent similarity augmentations.
TrainingPair make_pair_temporal(const Clip& clip, int64_t anchor, int64_t window,
                                bool flip_enabled, const TransformRanges& ranges, Rng& rng);

}  // namespace lmk
