#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "lmk/common.hpp"

namespace lmk {

enum class ToyFamily { A, B };

std::string to_string(ToyFamily f);
ToyFamily toy_family_from_string(const std::string& s);

inline constexpr int64_t kToyParts = 10;

/// One rendered sprite sample: image, the 10 part centers in pixel units,
/// and a stable id. Parts 0 and 1 are the designated anchor pair used as the
/// inter-ocular normalizer in evaluation.
struct ToySample {
  std::string id;
  torch::Tensor image_u8;  // (3, 128, 128) uint8
  torch::Tensor centers;   // (10, 2) float64, pixel units
};

/// Deterministic articulated-sprite corpus. Family A and B differ in part
/// shapes, layout topology, palette, and background statistics. Poses are
/// resampled until every part center is the topmost content at its own
/// location, so annotations always lie inside their part's rendered mask.
std::vector<ToySample> toy_corpus(uint64_t seed, int64_t n_images, ToyFamily family);

/// Write a corpus to disk:
///   out_dir/manifest.txt
///   out_dir/<split>/images/<id>.ppm
///   out_dir/<split>/annotations.csv   (id,x1,y1,...,x10,y10)
/// Byte-identical for identical arguments. Refuses a non-empty out_dir
/// unless force is set. n_test == 0 writes only the train split.
void write_toy_corpus(const std::string& out_dir, uint64_t seed, int64_t n_train,
                      int64_t n_test, ToyFamily family, bool force);

}  // namespace lmk
