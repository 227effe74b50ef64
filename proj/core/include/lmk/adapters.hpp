#pragma once

#include <torch/torch.h>

#include <map>
#include <string>

#include "lmk/common.hpp"

namespace lmk {

/// 4-axis convolution weight tensor (C_out, C_in, k, k). The substrate that
/// projection adapters act on.
struct ConvKernel {
  std::string layer_id;
  torch::Tensor weights;  // (C_out, C_in, k, k)

  int64_t c_out() const { return weights.size(0); }
  int64_t c_in() const { return weights.size(1); }
  void validate() const;
};

/// Learnable square matrix over a layer's output channels. Fresh adapters are
/// exactly the identity, so an untrained adapted model reproduces its core.
struct ProjectionAdapter {
  std::string layer_id;
  torch::Tensor matrix;  // (C_out, C_out)
  bool trainable = true;

  int64_t dim() const { return matrix.size(0); }
};

ProjectionAdapter init_adapter(int64_t c_out, std::string layer_id = "");

/// 1-mode tensor product: T[o,i,a,b] = sum_o' matrix[o,o'] * weights[o',i,a,b].
/// Pure; inputs are not modified. Differentiable through both arguments.
ConvKernel mode1_product(const ProjectionAdapter& adapter, const ConvKernel& core);

/// Tensor-level form used inside network forward passes (keeps autograd
/// history; the ConvKernel overload wraps this).
torch::Tensor mode1_product(const torch::Tensor& matrix, const torch::Tensor& weights);

/// A conv layer whose weight is either a plain parameter ("direct", used by
/// the pretrain/scratch/finetune regimes) or the projection of a frozen core
/// kernel through a trainable adapter ("projected", the proposed regime).
/// The effective weight is re-materialized on every forward pass so gradients
/// reach the adapter.
class ProjectedConv2dImpl : public torch::nn::Module {
 public:
  ProjectedConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1,
                      int64_t padding = 0, bool bias = false, bool projected = false);

  torch::Tensor forward(const torch::Tensor& x);

  /// Effective kernel for the current parameters (projected: adapter x core).
  torch::Tensor effective_weight() const;

  bool projected() const { return projected_; }
  int64_t in_channels() const { return in_; }
  int64_t out_channels() const { return out_; }

  /// Install core weights and reset the adapter to identity (projected mode),
  /// or copy into the trainable weight (direct mode).
  void load_core_weight(const torch::Tensor& w);

  torch::Tensor weight;   // direct mode parameter (undefined when projected)
  torch::Tensor core;     // frozen buffer (projected mode)
  torch::Tensor adapter;  // (C_out, C_out) parameter (projected mode)
  torch::Tensor bias;

 private:
  int64_t in_, out_, kernel_, stride_, padding_;
  bool has_bias_, projected_;
};
TORCH_MODULE(ProjectedConv2d);

struct ParamCounts {
  int64_t trainable = 0;
  int64_t frozen = 0;
  double ratio = 0.0;  // trainable / (trainable + frozen) for proposed, else trainable / total
};

/// Parameter accounting over a detector module tree. Frozen counts the core
/// conv buffers of projected layers; running batch-norm statistics are state,
/// not learnables, and are excluded from both counts.
ParamCounts count_parameters(const torch::nn::Module& model, Regime regime);

}  // namespace lmk
