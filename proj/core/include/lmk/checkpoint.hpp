#pragma once

#include <map>
#include <optional>
#include <string>

#include "lmk/detector.hpp"
#include "lmk/generator.hpp"

namespace lmk {

/// Versioned checkpoint container.
///
/// On-disk layout (little-endian, format "LMKCKPT1", version 1):
///   magic "LMKCKPT1", int32 version,
///   meta key=value text block (length-prefixed): regime, K, config_hash,
///     detector_config, generator_config?, epoch, step,
///   named tensor section: int32 count, then per tensor
///     name, int32 dtype, int32 ndim, int64 dims[ndim], raw payload,
///   blob section: int32 count, then (name, int64 size, bytes).
/// Tensor names are namespaced: core/<layer_id>, adapter/<layer_id>,
/// head/<name>, norm/<path>, gen/<path>. Blobs hold serialized optimizer
/// state for resumable runs.
struct Checkpoint {
  int64_t version = 1;
  Regime regime = Regime::pretrain;
  int64_t K = 10;
  std::string config_hash;
  DetectorConfig detector_config;
  std::optional<GeneratorConfig> generator_config;
  int64_t epoch = 0;
  int64_t step = 0;

  std::map<std::string, torch::Tensor> core;      // trunk conv kernels
  std::map<std::string, torch::Tensor> adapters;  // projection matrices (proposed)
  std::map<std::string, torch::Tensor> head;      // head.weight / head.bias
  std::map<std::string, torch::Tensor> norms;     // batch-norm state by module path
  std::map<std::string, torch::Tensor> generator; // generator state (adaptation runs)
  std::map<std::string, std::string> blobs;       // optimizer archives
};

/// Capture the full state of a model (and optionally its generator).
Checkpoint snapshot(const LandmarkDetector& detector, const GeneratorNet* generator,
                    Regime regime, const std::string& config_hash, int64_t epoch = 0,
                    int64_t step = 0);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Exact restore into a detector built with the checkpoint's configuration.
void install(LandmarkDetector& detector, const Checkpoint& ckpt);
void install_generator(GeneratorNet& generator, const Checkpoint& ckpt);

/// Initialize a (possibly projected) detector from a core checkpoint: trunk
/// weights land in the frozen cores (projected) or plain weights (direct),
/// batch-norm state is copied, the head is fresh unless copy_head.
void load_core_into(LandmarkDetector& detector, const Checkpoint& ckpt, bool copy_head);

/// Serialize/restore optimizer state through the blob section.
std::string optimizer_blob(torch::optim::Optimizer& opt);
void load_optimizer_blob(torch::optim::Optimizer& opt, const std::string& blob);

}  // namespace lmk
