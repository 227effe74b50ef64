#include "lmk/generator.hpp"

#include <sstream>

namespace lmk {

std::string GeneratorConfig::serialize() const {
  std::ostringstream os;
  os << "K=" << K << ";features=" << features << ";blocks=" << blocks;
  return os.str();
}

GeneratorConfig GeneratorConfig::deserialize(const std::string& s) {
  GeneratorConfig cfg;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ';')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("bad generator config: " + s);
    auto key = item.substr(0, eq);
    auto val = std::stoll(item.substr(eq + 1));
    if (key == "K") cfg.K = val;
    else if (key == "features") cfg.features = val;
    else if (key == "blocks") cfg.blocks = val;
    else throw ConfigError("bad generator config key: " + key);
  }
  return cfg;
}

GenResBlockImpl::GenResBlockImpl(int64_t channels) {
  conv1 = register_module("conv1", torch::nn::Conv2d(
                                       torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(channels));
  conv2 = register_module("conv2", torch::nn::Conv2d(
                                       torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
  bn2 = register_module("bn2", torch::nn::BatchNorm2d(channels));
}

torch::Tensor GenResBlockImpl::forward(torch::Tensor x) {
  auto y = torch::relu(bn1(conv1(x)));
  y = bn2(conv2(y));
  return torch::relu(x + y);
}

GeneratorNetImpl::GeneratorNetImpl(GeneratorConfig cfg) : cfg_(cfg) {
  const int64_t f = cfg_.features;
  enc1 = register_module("enc1", torch::nn::Conv2d(
                                     torch::nn::Conv2dOptions(3, f / 2, 3).stride(2).padding(1)));
  enc1_bn = register_module("enc1_bn", torch::nn::BatchNorm2d(f / 2));
  enc2 = register_module("enc2", torch::nn::Conv2d(
                                     torch::nn::Conv2dOptions(f / 2, f, 3).stride(2).padding(1)));
  enc2_bn = register_module("enc2_bn", torch::nn::BatchNorm2d(f));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < cfg_.blocks; ++i) blocks->push_back(GenResBlock(f + cfg_.K));
  dec1 = register_module("dec1", torch::nn::Conv2d(
                                     torch::nn::Conv2dOptions(f + cfg_.K, f / 2, 3).padding(1)));
  dec1_bn = register_module("dec1_bn", torch::nn::BatchNorm2d(f / 2));
  dec2 = register_module("dec2", torch::nn::Conv2d(
                                     torch::nn::Conv2dOptions(f / 2, f / 4, 3).padding(1)));
  dec2_bn = register_module("dec2_bn", torch::nn::BatchNorm2d(f / 4));
  out = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(f / 4, 3, 3).padding(1)));
}

torch::Tensor GeneratorNetImpl::forward(const torch::Tensor& deformed,
                                        const torch::Tensor& cond_maps) {
  namespace F = torch::nn::functional;
  auto x = torch::relu(enc1_bn(enc1(deformed)));
  x = torch::relu(enc2_bn(enc2(x)));
  auto cond = cond_maps;
  if (cond.size(-1) != x.size(-1) || cond.size(-2) != x.size(-2)) {
    cond = F::interpolate(cond, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{x.size(-2), x.size(-1)})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
  }
  x = torch::cat({x, cond}, 1);
  for (auto& block : *blocks) x = block->as<GenResBlockImpl>()->forward(x);
  auto up = [](const torch::Tensor& t) {
    return F::interpolate(t, F::InterpolateFuncOptions()
                                 .scale_factor(std::vector<double>{2.0, 2.0})
                                 .mode(torch::kNearest));
  };
  x = torch::relu(dec1_bn(dec1(up(x))));
  x = torch::relu(dec2_bn(dec2(up(x))));
  return torch::sigmoid(out(x));
}

torch::Tensor generate(GeneratorNet& gen, const torch::Tensor& deformed,
                       const HeatmapStack& cond) {
  if (cond.kind != HeatmapKind::gaussian) {
    throw std::invalid_argument(
        "generate: conditioning must be gaussian-kind heatmaps (raw detector output would "
        "bypass the bottleneck)");
  }
  auto maps = cond.maps.dim() == 3 ? cond.maps.unsqueeze(0) : cond.maps;
  auto imgs = deformed.dim() == 3 ? deformed.unsqueeze(0) : deformed;
  auto result = gen->forward(imgs, maps);
  return deformed.dim() == 3 ? result.squeeze(0) : result;
}

}  // namespace lmk
