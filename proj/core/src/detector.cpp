#include "lmk/detector.hpp"

#include <sstream>

namespace lmk {

DetectorConfig DetectorConfig::reference(int64_t K, bool projected) {
  return DetectorConfig{K, 64, 160, 4, projected};
}

DetectorConfig DetectorConfig::desk(int64_t K, bool projected) {
  return DetectorConfig{K, 16, 32, 3, projected};
}

std::string DetectorConfig::serialize() const {
  std::ostringstream os;
  os << "K=" << K << ";stem=" << stem_channels << ";trunk=" << trunk_channels
     << ";levels=" << hg_levels << ";projected=" << (projected ? 1 : 0);
  return os.str();
}

DetectorConfig DetectorConfig::deserialize(const std::string& s) {
  DetectorConfig cfg;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ';')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("bad detector config: " + s);
    auto key = item.substr(0, eq);
    auto val = std::stoll(item.substr(eq + 1));
    if (key == "K") cfg.K = val;
    else if (key == "stem") cfg.stem_channels = val;
    else if (key == "trunk") cfg.trunk_channels = val;
    else if (key == "levels") cfg.hg_levels = val;
    else if (key == "projected") cfg.projected = val != 0;
    else throw ConfigError("bad detector config key: " + key);
  }
  return cfg;
}

ResidualBlockImpl::ResidualBlockImpl(int64_t in, int64_t out, bool projected) {
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(in));
  conv1 = register_module("conv1", ProjectedConv2d(in, out, 3, 1, 1, false, projected));
  bn2 = register_module("bn2", torch::nn::BatchNorm2d(out));
  conv2 = register_module("conv2", ProjectedConv2d(out, out, 3, 1, 1, false, projected));
  if (in != out) {
    skip = register_module("skip", ProjectedConv2d(in, out, 1, 1, 0, false, projected));
  }
}

torch::Tensor ResidualBlockImpl::forward(torch::Tensor x) {
  auto y = conv1(torch::relu(bn1(x)));
  y = conv2(torch::relu(bn2(y)));
  return y + (skip ? skip(x) : x);
}

HourglassImpl::HourglassImpl(int64_t levels, int64_t channels, bool projected) {
  up1 = register_module("up1", ResidualBlock(channels, channels, projected));
  pool = register_module("pool", torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2)));
  low1 = register_module("low1", ResidualBlock(channels, channels, projected));
  if (levels > 1) {
    low2 = register_module("low2",
                           std::make_shared<HourglassImpl>(levels - 1, channels, projected));
  } else {
    inner = register_module("inner", ResidualBlock(channels, channels, projected));
  }
  low3 = register_module("low3", ResidualBlock(channels, channels, projected));
}

torch::Tensor HourglassImpl::forward(torch::Tensor x) {
  auto up = up1(x);
  auto low = low1(pool(x));
  low = low2 ? low2->forward(low) : inner(low);
  low = low3(low);
  auto up2 = torch::nn::functional::interpolate(
      low, torch::nn::functional::InterpolateFuncOptions()
               .scale_factor(std::vector<double>{2.0, 2.0})
               .mode(torch::kNearest));
  return up + up2;
}

LandmarkDetectorImpl::LandmarkDetectorImpl(DetectorConfig cfg) : cfg_(cfg) {
  const bool p = cfg_.projected;
  stem_conv = register_module("stem_conv", ProjectedConv2d(3, cfg_.stem_channels, 7, 2, 3, false, p));
  stem_bn = register_module("stem_bn", torch::nn::BatchNorm2d(cfg_.stem_channels));
  stem_res = register_module("stem_res", ResidualBlock(cfg_.stem_channels, cfg_.trunk_channels, p));
  stem_pool = register_module("stem_pool", torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(2)));
  hg = register_module("hg", Hourglass(cfg_.hg_levels, cfg_.trunk_channels, p));
  post_conv = register_module("post_conv",
                              ProjectedConv2d(cfg_.trunk_channels, cfg_.trunk_channels, 1, 1, 0, false, p));
  post_bn = register_module("post_bn", torch::nn::BatchNorm2d(cfg_.trunk_channels));
  // Domain-specific head, always trained from scratch; never projected.
  head = register_module("head", torch::nn::Conv2d(
                                     torch::nn::Conv2dOptions(cfg_.trunk_channels, cfg_.K, 1)));
  {
    torch::NoGradGuard g;
    head->weight.normal_(0.0, 1e-2);
    head->bias.zero_();
  }
}

torch::Tensor LandmarkDetectorImpl::forward(torch::Tensor x) {
  if (x.dim() != 4 || x.size(1) != 3) throw ShapeError("detector expects (B, 3, H, W) images");
  if (x.size(2) != kImageSize || x.size(3) != kImageSize) {
    throw ShapeError("detector expects 128x128 input images");
  }
  x = torch::relu(stem_bn(stem_conv(x)));
  x = stem_res(x);
  x = stem_pool(x);
  x = hg(x);
  x = torch::relu(post_bn(post_conv(x)));
  return head(x);  // (B, K, 32, 32) raw heatmaps
}

LandmarkSet LandmarkDetectorImpl::detect(const torch::Tensor& images, DetectMode mode,
                                         double beta) {
  torch::NoGradGuard g;
  auto batched = images.dim() == 4 ? images : images.unsqueeze(0);
  HeatmapStack raw{forward(batched), HeatmapKind::raw};
  auto pts = mode == DetectMode::softargmax ? softargmax(raw, beta) : hard_argmax(raw);
  if (images.dim() == 3) pts.points = pts.points.squeeze(0);
  return pts;
}

std::vector<std::pair<std::string, ProjectedConv2d>> LandmarkDetectorImpl::conv_layers() const {
  std::vector<std::pair<std::string, ProjectedConv2d>> out;
  for (const auto& m : named_modules("", /*include_self=*/false)) {
    if (auto conv = std::dynamic_pointer_cast<ProjectedConv2dImpl>(m.value())) {
      out.emplace_back(m.key(), ProjectedConv2d(conv));
    }
  }
  return out;
}

std::map<std::string, ConvKernel> LandmarkDetectorImpl::effective_kernels() const {
  std::map<std::string, ConvKernel> out;
  for (const auto& [name, conv] : conv_layers()) {
    out.emplace(name, ConvKernel{name, conv->effective_weight()});
  }
  return out;
}

void LandmarkDetectorImpl::load_core(const std::map<std::string, torch::Tensor>& core_weights,
                                     const std::map<std::string, torch::Tensor>& norm_state,
                                     const std::map<std::string, torch::Tensor>& head_state,
                                     bool copy_head) {
  for (auto&& [name, conv] : conv_layers()) {
    auto it = core_weights.find(name);
    if (it == core_weights.end()) {
      throw std::runtime_error("checkpoint is missing core weights for layer '" + name + "'");
    }
    conv->load_core_weight(it->second);
  }
  {
    torch::NoGradGuard g;
    for (const auto& b : named_buffers()) {
      auto it = norm_state.find(b.key());
      if (it != norm_state.end()) b.value().copy_(it->second);
    }
    for (const auto& p : named_parameters()) {
      auto it = norm_state.find(p.key());
      if (it != norm_state.end()) p.value().copy_(it->second);
    }
    if (copy_head) {
      auto w = head_state.find("head.weight");
      auto bias = head_state.find("head.bias");
      if (w == head_state.end() || bias == head_state.end()) {
        throw std::runtime_error("checkpoint has no head weights to copy");
      }
      if (w->second.size(0) != cfg_.K) {
        throw std::runtime_error("cannot copy head: checkpoint K=" +
                                 std::to_string(w->second.size(0)) + " vs model K=" +
                                 std::to_string(cfg_.K));
      }
      head->weight.copy_(w->second);
      head->bias.copy_(bias->second);
    }
  }
}

LandmarkSet detect(LandmarkDetector& model, const torch::Tensor& image, DetectMode mode,
                   double beta) {
  const bool was_training = model->is_training();
  model->eval();
  auto pts = model->detect(image, mode, beta);
  if (was_training) model->train();
  return pts;
}

}  // namespace lmk
