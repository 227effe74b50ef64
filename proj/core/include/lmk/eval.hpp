#pragma once

#include <string>
#include <vector>

#include "lmk/config.hpp"
#include "lmk/dataset.hpp"
#include "lmk/detector.hpp"

namespace lmk {

enum class Direction { forward, backward };
enum class ErrorNorm { nme, mse };

/// Affine map (with intercept) from flattened source points to flattened
/// target points, fitted by least squares.
struct RegressionModel {
  torch::Tensor weight;     // (2S, 2T) float64
  torch::Tensor intercept;  // (2T) float64
  int64_t n_im = 0;
  bool ridge_used = false;
};

/// Least-squares fit on the first n_im pairs. Forward maps discovered ->
/// annotated, backward maps annotated -> discovered. A rank-deficient design
/// matrix falls back to ridge with lambda = 1e-6 (recorded on the model).
RegressionModel fit_regressor(const torch::Tensor& discovered,  // (N, S, 2)
                              const torch::Tensor& annotated,   // (N, T, 2)
                              int64_t n_im, Direction direction);

torch::Tensor predict(const RegressionModel& model, const torch::Tensor& source);  // (N,S,2)->(N,T,2)

struct RegressionErrorResult {
  double error = 0.0;
  int64_t excluded = 0;  // samples with zero inter-ocular distance
};

/// Mean point error over samples and points, normalized per sample by the
/// inter-ocular distance, as a percentage. `mse` reports squared distances
/// normalized by the squared inter-ocular distance instead.
RegressionErrorResult regression_error(const RegressionModel& model,
                                       const torch::Tensor& source,        // (N, S, 2)
                                       const torch::Tensor& target,        // (N, T, 2)
                                       const torch::Tensor& inter_ocular,  // (N)
                                       ErrorNorm norm = ErrorNorm::nme);

struct ConsistencyResult {
  std::vector<double> per_point;  // sorted ascending
  std::vector<int64_t> point_order;
  double mean = 0.0;
  int64_t excluded = 0;  // (point, trial) pairs whose target left the image
};

/// Equivariance residual: || detect(warp(y, A)) - A(detect(y)) || per point,
/// in input-image pixels, as a percentage of image width.
ConsistencyResult consistency_error(LandmarkDetector& detector, const Dataset& dataset,
                                    const TransformRanges& ranges, int64_t trials,
                                    uint64_t seed,
                                    DetectMode mode = DetectMode::softargmax);

/// Machine-readable protocol report (versioned line format, round-trippable).
struct EvalReport {
  int version = 1;
  std::string protocol;  // forward | backward | consistency
  std::string regime;
  std::string dataset_id;
  uint64_t seed = 0;
  std::string config_hash;
  std::string normalization;
  std::vector<std::pair<std::string, double>> rows;  // n_im label or point index -> value
  int64_t excluded = 0;
  bool ridge_used = false;

  bool operator==(const EvalReport&) const = default;
};

void write_report(const std::string& path, const EvalReport& report);
EvalReport read_report(const std::string& path);

/// Side-by-side regime comparison in the forward-top / backward-bottom table
/// layout, one row per n_im value.
std::string collate_reports(const std::vector<EvalReport>& reports);

/// Protocol drivers: detect landmarks over both splits, fit per n_im on the
/// (seed-shuffled) training split, report errors on the test split.
EvalReport run_regression_protocol(LandmarkDetector& detector, const Dataset& train,
                                   const Dataset& test, Direction direction,
                                   const RunConfig& cfg, uint64_t seed,
                                   const std::string& regime_label);

EvalReport run_consistency_protocol(LandmarkDetector& detector, const Dataset& test,
                                    const RunConfig& cfg, uint64_t seed,
                                    const std::string& regime_label);

}  // namespace lmk
