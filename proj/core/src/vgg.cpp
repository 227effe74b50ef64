#include "lmk/vgg.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "lmk/common.hpp"

namespace lmk {

namespace {

constexpr char kMagic[] = "LMKVGG1\n";

void write_raw(std::ofstream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_raw(std::ifstream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("feature extractor weights: truncated file");
}

std::vector<int64_t> block_widths(VggPreset preset) {
  // Per-block conv widths; blocks have {2, 2, 4, 4, 4} convs.
  if (preset == VggPreset::vgg19) return {64, 128, 256, 512, 512};
  return {16, 32, 64, 128, 128};
}

}  // namespace

FeatureExtractor::FeatureExtractor(const std::string& weights_path) {
  std::ifstream is(weights_path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("feature extractor weights not found: '" + weights_path +
                             "' (perceptual loss has no fallback)");
  }
  char magic[8];
  read_raw(is, magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("feature extractor weights: bad magic in '" + weights_path + "'");
  }
  int32_t n_convs = 0;
  read_raw(is, &n_convs, 4);
  if (n_convs < kTapConvs.back() || n_convs > 16) {
    throw std::runtime_error("feature extractor weights: conv count " + std::to_string(n_convs) +
                             " does not cover the tap layers");
  }
  int64_t prev = 3;
  for (int32_t i = 0; i < n_convs; ++i) {
    int32_t c_out = 0, c_in = 0;
    read_raw(is, &c_out, 4);
    read_raw(is, &c_in, 4);
    if (c_out <= 0 || c_in != prev) {
      throw std::runtime_error("feature extractor weights: inconsistent channel counts");
    }
    auto w = torch::empty({c_out, c_in, 3, 3});
    auto b = torch::empty({c_out});
    read_raw(is, w.data_ptr<float>(), sizeof(float) * w.numel());
    read_raw(is, b.data_ptr<float>(), sizeof(float) * b.numel());
    w.set_requires_grad(false);
    b.set_requires_grad(false);
    weights_.push_back(w);
    biases_.push_back(b);
    prev = c_out;
  }
  // Channel statistics the classifier stack was trained with.
  mean_ = torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1});
  std_ = torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1});
}

std::vector<torch::Tensor> FeatureExtractor::features(const torch::Tensor& images) const {
  namespace F = torch::nn::functional;
  auto x = images.dim() == 3 ? images.unsqueeze(0) : images;
  x = (x - mean_) / std_;
  std::vector<torch::Tensor> taps;
  taps.reserve(kTapConvs.size());
  for (size_t i = 0; i < weights_.size(); ++i) {
    const int conv_index = static_cast<int>(i) + 1;
    x = torch::relu(F::conv2d(x, weights_[i], F::Conv2dFuncOptions().bias(biases_[i]).padding(1)));
    if (std::find(kTapConvs.begin(), kTapConvs.end(), conv_index) != kTapConvs.end()) {
      taps.push_back(x);
      if (conv_index == kTapConvs.back()) break;
    }
    if (std::find(kPoolAfter.begin(), kPoolAfter.end(), conv_index) != kPoolAfter.end()) {
      x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2));
    }
  }
  return taps;
}

void write_vgg_weights(const std::string& path, VggPreset preset, uint64_t seed) {
  const auto widths = block_widths(preset);
  const std::array<int, 5> convs_per_block = {2, 2, 4, 4, 4};
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write feature extractor weights to '" + path + "'");
  write_raw(os, kMagic, 8);
  int32_t n_convs = 16;
  write_raw(os, &n_convs, 4);
  auto gen = at::detail::createCPUGenerator(seed);
  int64_t prev = 3;
  for (size_t b = 0; b < widths.size(); ++b) {
    for (int c = 0; c < convs_per_block[b]; ++c) {
      const int64_t c_out = widths[b];
      const double stddev = std::sqrt(2.0 / (prev * 9.0));
      auto w = torch::randn({c_out, prev, 3, 3}, gen) * stddev;
      auto bias = torch::zeros({c_out});
      int32_t o = static_cast<int32_t>(c_out), in = static_cast<int32_t>(prev);
      write_raw(os, &o, 4);
      write_raw(os, &in, 4);
      auto wc = w.to(torch::kFloat32).contiguous();
      write_raw(os, wc.data_ptr<float>(), sizeof(float) * wc.numel());
      write_raw(os, bias.data_ptr<float>(), sizeof(float) * bias.numel());
      prev = c_out;
    }
  }
  if (!os) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace lmk
