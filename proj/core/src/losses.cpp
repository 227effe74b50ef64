#include "lmk/losses.hpp"

namespace lmk {

torch::Tensor supervised_loss(const HeatmapStack& pred, const HeatmapStack& target) {
  if (!pred.maps.sizes().equals(target.maps.sizes())) {
    throw ShapeError("supervised_loss: heatmap shapes differ");
  }
  return (pred.maps - target.maps).pow(2).mean();
}

torch::Tensor pixel_loss(const torch::Tensor& recon, const torch::Tensor& target) {
  if (!recon.sizes().equals(target.sizes())) {
    throw ShapeError("pixel_loss: image shapes differ");
  }
  return (recon - target).pow(2).mean();
}

torch::Tensor perceptual_loss(const torch::Tensor& recon, const torch::Tensor& target,
                              const FeatureExtractor& fx, const std::vector<int>& layers) {
  auto recon_feats = fx.features(recon);
  std::vector<torch::Tensor> target_feats;
  {
    torch::NoGradGuard g;
    target_feats = fx.features(target);
  }
  torch::Tensor loss = torch::zeros({}, recon.options());
  for (int l : layers) {
    if (l < 0 || l >= static_cast<int>(recon_feats.size())) {
      throw std::invalid_argument("perceptual_loss: layer index out of range");
    }
    loss = loss + (recon_feats[l] - target_feats[l]).abs().mean();
  }
  return loss;
}

TotalLossParts total_loss(const torch::Tensor& y, const torch::Tensor& y_prime,
                          LandmarkDetector& detector, GeneratorNet& generator,
                          const FeatureExtractor& fx, const TotalLossOptions& opts) {
  HeatmapStack raw{detector->forward(y.dim() == 3 ? y.unsqueeze(0) : y), HeatmapKind::raw};
  auto landmarks = softargmax(raw, opts.beta);
  auto cond = render_gaussians(landmarks, opts.sigma_sq);
  auto recon = generate(generator, y_prime, cond);
  auto target = y.dim() == 3 ? y.unsqueeze(0) : y;
  auto recon_b = recon.dim() == 3 ? recon.unsqueeze(0) : recon;
  auto pix = pixel_loss(recon_b, target);
  auto per = perceptual_loss(recon_b, target, fx, opts.perceptual_layers);
  TotalLossParts parts;
  parts.pixel = pix;
  parts.perceptual = per;
  parts.total = opts.pixel_weight * pix + opts.perceptual_weight * per;
  parts.reconstruction = recon;
  parts.landmarks = landmarks;
  return parts;
}

}  // namespace lmk
