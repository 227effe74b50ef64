#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace lmk {

// Which parameter sets are trainable.
enum class Regime { pretrain, scratch, finetune, proposed };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input images are fixed RGB 128x128; heatmaps 32x32. The grid-to-pixel
// conversion multiplies coordinates by kStride.
inline constexpr int64_t kImageSize = 128;
inline constexpr int64_t kHeatmapSize = 32;
inline constexpr int64_t kStride = kImageSize / kHeatmapSize;

inline constexpr double kDefaultBeta = 10.0;
inline constexpr double kDefaultSigmaSq = 0.5;

using Rng = std::mt19937_64;

// Stream for worker `index` derived from the run seed; streams are disjoint
// for distinct (seed, index) pairs in practice (splitmix-style mixing).
Rng make_rng(uint64_t seed, uint64_t index = 0);

// FNV-1a over a byte string; stable across platforms, used for config hashes.
uint64_t fnv1a(const std::string& bytes);
std::string hex64(uint64_t v);

std::string git_describe();

}  // namespace lmk
