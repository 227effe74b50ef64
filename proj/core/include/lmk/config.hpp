#pragma once

#include <map>
#include <string>
#include <vector>

#include "lmk/detector.hpp"
#include "lmk/generator.hpp"
#include "lmk/train.hpp"

namespace lmk {

/// Full run configuration: model shape, training schedule, augmentation
/// ranges, data and output paths. Parsed from a flat key=value file with
/// dotted keys; command-line overrides take precedence over file values.
/// Unknown keys are rejected.
struct RunConfig {
  DetectorConfig detector = DetectorConfig::desk();
  GeneratorConfig generator = GeneratorConfig::desk();
  TrainingConfig training;
  TransformRanges aug;

  std::string data_root;
  std::string data_mode = "warp";  // warp | temporal
  int64_t temporal_window = 100;
  bool temporal_flip = false;

  std::string out_dir = "runs";
  bool deterministic = false;
  std::string device = "cpu";       // env LMKADAPT_DEVICE only
  std::string command_line;         // informational, excluded from the hash

  int64_t eval_trials = 5;
  std::string eval_normalization = "nme";  // nme | mse
  std::string eval_mode = "softargmax";    // softargmax | argmax
  std::vector<std::string> eval_n_im = {"1", "5", "10", "100", "500", "1000", "5000", "all"};
  int64_t anchor_a = 0, anchor_b = 1;  // inter-ocular annotation indices

  void apply(const std::string& key, const std::string& value);
  void validate() const;

  /// Sorted key=value lines; the config hash is FNV-1a over this string.
  std::string canonical_string() const;
  std::string config_hash() const;
};

RunConfig parse_config_file(const std::string& path);
void apply_overrides(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv);

/// Write the run manifest: canonical config, seed, code revision, command
/// line. Sufficient to reproduce the run in deterministic mode.
void write_manifest(const std::string& path, const RunConfig& cfg,
                    const std::string& command_line);

}  // namespace lmk
