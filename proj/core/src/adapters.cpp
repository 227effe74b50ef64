#include "lmk/adapters.hpp"

#include <sstream>

namespace lmk {

void ConvKernel::validate() const {
  if (weights.dim() != 4) {
    throw ShapeError("ConvKernel '" + layer_id + "' must be 4-axis, got " +
                     std::to_string(weights.dim()));
  }
  for (int64_t d = 0; d < 4; ++d) {
    if (weights.size(d) <= 0) throw ShapeError("ConvKernel '" + layer_id + "' has empty axis");
  }
  if (!weights.isfinite().all().item<bool>()) {
    throw std::invalid_argument("ConvKernel '" + layer_id + "' has non-finite entries");
  }
}

ProjectionAdapter init_adapter(int64_t c_out, std::string layer_id) {
  if (c_out < 1) throw std::invalid_argument("init_adapter: c_out must be >= 1");
  return ProjectionAdapter{std::move(layer_id), torch::eye(c_out, torch::kFloat32), true};
}

torch::Tensor mode1_product(const torch::Tensor& matrix, const torch::Tensor& weights) {
  // Contract the adapter's second axis with the kernel's output-channel axis.
  return torch::tensordot(matrix, weights, {1}, {0});
}

ConvKernel mode1_product(const ProjectionAdapter& adapter, const ConvKernel& core) {
  core.validate();
  if (adapter.matrix.dim() != 2 || adapter.matrix.size(0) != adapter.matrix.size(1)) {
    throw ShapeError("adapter '" + adapter.layer_id + "' matrix must be square");
  }
  if (adapter.dim() != core.c_out()) {
    std::ostringstream os;
    os << "mode1_product: adapter '" << adapter.layer_id << "' (dim " << adapter.dim()
       << ") does not match kernel '" << core.layer_id << "' (C_out " << core.c_out() << ")";
    throw ShapeError(os.str());
  }
  return ConvKernel{core.layer_id, mode1_product(adapter.matrix, core.weights)};
}

ProjectedConv2dImpl::ProjectedConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride,
                                         int64_t padding, bool with_bias, bool projected)
    : in_(in), out_(out), kernel_(kernel), stride_(stride), padding_(padding),
      has_bias_(with_bias), projected_(projected) {
  auto init = torch::empty({out, in, kernel, kernel});
  torch::nn::init::kaiming_normal_(init, 0.0, torch::kFanOut, torch::kReLU);
  if (projected_) {
    core = register_buffer("core", init);
    core.set_requires_grad(false);
    adapter = register_parameter("adapter", torch::eye(out));
  } else {
    weight = register_parameter("weight", init);
  }
  if (has_bias_) bias = register_parameter("bias", torch::zeros({out}));
}

torch::Tensor ProjectedConv2dImpl::forward(const torch::Tensor& x) {
  auto w = projected_ ? mode1_product(adapter, core) : weight;
  return torch::nn::functional::conv2d(
      x, w, torch::nn::functional::Conv2dFuncOptions().bias(bias).stride(stride_).padding(padding_));
}

torch::Tensor ProjectedConv2dImpl::effective_weight() const {
  return projected_ ? mode1_product(adapter, core) : weight;
}

void ProjectedConv2dImpl::load_core_weight(const torch::Tensor& w) {
  if (!w.sizes().equals({out_, in_, kernel_, kernel_})) {
    std::ostringstream os;
    os << "load_core_weight: expected " << torch::IntArrayRef({out_, in_, kernel_, kernel_})
       << ", got " << w.sizes();
    throw ShapeError(os.str());
  }
  torch::NoGradGuard g;
  if (projected_) {
    core.copy_(w);
    adapter.copy_(torch::eye(out_));
  } else {
    weight.copy_(w);
  }
}

ParamCounts count_parameters(const torch::nn::Module& model, Regime regime) {
  ParamCounts c;
  for (const auto& p : model.named_parameters(/*recurse=*/true)) {
    c.trainable += p.value().numel();
  }
  for (const auto& b : model.named_buffers(/*recurse=*/true)) {
    // Core kernels live in buffers named ".../core"; batch-norm running
    // statistics are state rather than learned weights and are not counted.
    const auto& name = b.key();
    if (name.size() >= 4 && name.substr(name.size() - 4) == "core") {
      c.frozen += b.value().numel();
    }
  }
  if (regime == Regime::proposed) {
    c.ratio = static_cast<double>(c.trainable) / static_cast<double>(c.trainable + c.frozen);
  } else {
    c.ratio = c.trainable > 0 ? 1.0 : 0.0;
  }
  return c;
}

}  // namespace lmk
