#include "lmk/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace lmk {

namespace {

constexpr double kRidgeLambda = 1e-6;

torch::Tensor flatten_points(const torch::Tensor& pts) {  // (N, P, 2) -> (N, 2P) f64
  return pts.to(torch::kFloat64).reshape({pts.size(0), -1});
}

}  // namespace

RegressionModel fit_regressor(const torch::Tensor& discovered, const torch::Tensor& annotated,
                              int64_t n_im, Direction direction) {
  if (n_im < 1) throw std::invalid_argument("fit_regressor: n_im must be >= 1");
  if (discovered.size(0) != annotated.size(0)) {
    throw ShapeError("fit_regressor: sample counts differ");
  }
  if (n_im > discovered.size(0)) {
    throw std::invalid_argument("fit_regressor: n_im exceeds available samples");
  }
  auto src = direction == Direction::forward ? discovered : annotated;
  auto dst = direction == Direction::forward ? annotated : discovered;
  auto x = flatten_points(src.narrow(0, 0, n_im));
  auto y = flatten_points(dst.narrow(0, 0, n_im));

  const int64_t n = x.size(0), d = x.size(1);
  auto design = torch::cat({x, torch::ones({n, 1}, x.options())}, 1);  // (n, d+1)
  auto g = design.t().matmul(design);
  auto rhs = design.t().matmul(y);

  RegressionModel model;
  model.n_im = n_im;
  torch::Tensor beta;
  bool full_rank = n >= d + 1;
  if (full_rank) {
    // Cholesky doubles as the positive-definiteness (rank) probe.
    auto [chol, info] = torch::linalg_cholesky_ex(g);
    full_rank = info.item<int64_t>() == 0;
    if (full_rank) beta = torch::cholesky_solve(rhs, chol);
  }
  if (!full_rank) {
    model.ridge_used = true;
    auto reg = g + kRidgeLambda * torch::eye(d + 1, g.options());
    beta = torch::linalg_solve(reg, rhs);
  }
  model.weight = beta.narrow(0, 0, d).clone();
  model.intercept = beta.select(0, d).clone();
  return model;
}

torch::Tensor predict(const RegressionModel& model, const torch::Tensor& source) {
  auto x = flatten_points(source);
  auto y = x.matmul(model.weight) + model.intercept;
  return y.reshape({source.size(0), -1, 2});
}

RegressionErrorResult regression_error(const RegressionModel& model, const torch::Tensor& source,
                                       const torch::Tensor& target,
                                       const torch::Tensor& inter_ocular, ErrorNorm norm) {
  auto pred = predict(model, source);
  auto gt = target.to(torch::kFloat64);
  auto dist = (pred - gt).norm(2, -1);  // (N, T)
  auto iod = inter_ocular.to(torch::kFloat64);

  RegressionErrorResult res;
  auto valid = iod > 0;
  res.excluded = (iod.numel() - valid.sum().item<int64_t>());
  if (valid.sum().item<int64_t>() == 0) {
    throw std::runtime_error("regression_error: every sample has zero inter-ocular distance");
  }
  torch::Tensor per_sample;
  if (norm == ErrorNorm::nme) {
    per_sample = dist / iod.unsqueeze(1);
  } else {
    per_sample = dist.pow(2) / iod.pow(2).unsqueeze(1);
  }
  res.error = 100.0 * per_sample.index({valid}).mean().item<double>();
  return res;
}

ConsistencyResult consistency_error(LandmarkDetector& detector, const Dataset& dataset,
                                    const TransformRanges& ranges, int64_t trials, uint64_t seed,
                                    DetectMode mode) {
  const bool was_training = detector->is_training();
  detector->eval();
  const int64_t k = detector->config().K;
  std::vector<double> sums(k, 0.0);
  std::vector<int64_t> counts(k, 0);
  int64_t excluded = 0;
  auto rng = make_rng(seed, 0x5eed);

  torch::NoGradGuard g;
  for (int64_t i = 0; i < dataset.size(); ++i) {
    auto img = dataset.image(i);
    auto base = detector->detect(img.unsqueeze(0), mode).points.squeeze(0).to(torch::kFloat64) *
                static_cast<double>(kStride);
    std::vector<SimilarityTransform> ts;
    std::vector<torch::Tensor> warped;
    for (int64_t t = 0; t < trials; ++t) {
      auto a = sample_transform(ranges, rng);
      ts.push_back(a);
      warped.push_back(warp(img, a));
    }
    auto det_w = detector->detect(torch::stack(warped), mode).points.to(torch::kFloat64) *
                 static_cast<double>(kStride);  // (T, K, 2)
    for (int64_t t = 0; t < trials; ++t) {
      auto expected = transform_points(base, ts[t]);  // (K, 2)
      auto eu = expected.select(-1, 0), ev = expected.select(-1, 1);
      auto oob = (eu < 0) | (eu > kImageSize - 1) | (ev < 0) | (ev > kImageSize - 1);
      auto err = (det_w[t] - expected).norm(2, -1);  // (K)
      auto erra = err.accessor<double, 1>();
      auto ooba = oob.accessor<bool, 1>();
      for (int64_t j = 0; j < k; ++j) {
        if (ooba[j]) {
          ++excluded;
          continue;
        }
        sums[j] += erra[j];
        counts[j] += 1;
      }
    }
  }
  if (was_training) detector->train();

  ConsistencyResult res;
  res.excluded = excluded;
  std::vector<std::pair<double, int64_t>> scored(k);
  for (int64_t j = 0; j < k; ++j) {
    const double mean_px = counts[j] > 0 ? sums[j] / counts[j] : 0.0;
    scored[j] = {100.0 * mean_px / kImageSize, j};
  }
  std::sort(scored.begin(), scored.end());
  for (auto& [v, j] : scored) {
    res.per_point.push_back(v);
    res.point_order.push_back(j);
  }
  res.mean = std::accumulate(res.per_point.begin(), res.per_point.end(), 0.0) / k;
  return res;
}

void write_report(const std::string& path, const EvalReport& r) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write report '" + path + "'");
  os << "lmk-eval-report v" << r.version << "\n"
     << "protocol=" << r.protocol << "\n"
     << "regime=" << r.regime << "\n"
     << "dataset=" << r.dataset_id << "\n"
     << "seed=" << r.seed << "\n"
     << "config_hash=" << r.config_hash << "\n"
     << "normalization=" << r.normalization << "\n"
     << "excluded=" << r.excluded << "\n"
     << "ridge_used=" << (r.ridge_used ? 1 : 0) << "\n";
  char buf[96];
  for (const auto& [label, value] : r.rows) {
    std::snprintf(buf, sizeof(buf), "row,%s,%.9g\n", label.c_str(), value);
    os << buf;
  }
}

EvalReport read_report(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("report not found: '" + path + "'");
  EvalReport r;
  std::string line;
  if (!std::getline(is, line) || line.rfind("lmk-eval-report v", 0) != 0) {
    throw std::runtime_error("'" + path + "' is not an eval report");
  }
  r.version = std::stoi(line.substr(std::string("lmk-eval-report v").size()));
  if (r.version != 1) throw std::runtime_error("unsupported report version");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("row,", 0) == 0) {
      auto second = line.find(',', 4);
      if (second == std::string::npos) throw std::runtime_error("bad report row: " + line);
      r.rows.emplace_back(line.substr(4, second - 4), std::stod(line.substr(second + 1)));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("bad report line: " + line);
    auto key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "protocol") r.protocol = val;
    else if (key == "regime") r.regime = val;
    else if (key == "dataset") r.dataset_id = val;
    else if (key == "seed") r.seed = std::stoull(val);
    else if (key == "config_hash") r.config_hash = val;
    else if (key == "normalization") r.normalization = val;
    else if (key == "excluded") r.excluded = std::stoll(val);
    else if (key == "ridge_used") r.ridge_used = val == "1";
    else throw std::runtime_error("unknown report key: " + key);
  }
  return r;
}

std::string collate_reports(const std::vector<EvalReport>& reports) {
  // Collect regimes and n_im labels preserving first-seen order.
  std::vector<std::string> regimes, labels;
  for (const auto& r : reports) {
    if (std::find(regimes.begin(), regimes.end(), r.regime) == regimes.end()) {
      regimes.push_back(r.regime);
    }
    for (const auto& [label, _] : r.rows) {
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    }
  }
  auto value_of = [&](const std::string& protocol, const std::string& regime,
                      const std::string& label) -> std::string {
    for (const auto& r : reports) {
      if (r.protocol != protocol || r.regime != regime) continue;
      for (const auto& [l, v] : r.rows) {
        if (l == label) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%8.2f", v);
          return buf;
        }
      }
    }
    return "       -";
  };
  std::ostringstream os;
  for (const std::string protocol : {"forward", "backward"}) {
    bool any = std::any_of(reports.begin(), reports.end(),
                           [&](const EvalReport& r) { return r.protocol == protocol; });
    if (!any) continue;
    os << "# " << protocol << "\n";
    os << "n_im";
    for (const auto& reg : regimes) os << "," << reg;
    os << "\n";
    for (const auto& label : labels) {
      os << label;
      for (const auto& reg : regimes) os << "," << value_of(protocol, reg, label);
      os << "\n";
    }
  }
  return os.str();
}

namespace {

// Discovered landmarks for every sample, in pixel units, batched.
torch::Tensor discover_all(LandmarkDetector& detector, const Dataset& ds, DetectMode mode) {
  const bool was_training = detector->is_training();
  detector->eval();
  torch::NoGradGuard g;
  std::vector<torch::Tensor> out;
  const int64_t bs = 32;
  for (int64_t i = 0; i < ds.size(); i += bs) {
    const int64_t hi = std::min(ds.size(), i + bs);
    std::vector<torch::Tensor> imgs;
    for (int64_t j = i; j < hi; ++j) imgs.push_back(ds.image(j));
    out.push_back(detector->detect(torch::stack(imgs), mode).points.to(torch::kFloat64) *
                  static_cast<double>(kStride));
  }
  if (was_training) detector->train();
  return torch::cat(out, 0);  // (N, K, 2)
}

torch::Tensor stack_annotations(const Dataset& ds) {
  std::vector<torch::Tensor> anns;
  for (int64_t i = 0; i < ds.size(); ++i) anns.push_back(ds.annotations(i));
  return torch::stack(anns);  // (N, M, 2)
}

torch::Tensor inter_ocular_distances(const torch::Tensor& annotations, int64_t a, int64_t b) {
  auto pa = annotations.select(1, a), pb = annotations.select(1, b);
  return (pa - pb).norm(2, -1);  // (N)
}

}  // namespace

EvalReport run_regression_protocol(LandmarkDetector& detector, const Dataset& train,
                                   const Dataset& test, Direction direction, const RunConfig& cfg,
                                   uint64_t seed, const std::string& regime_label) {
  if (!train.annotated() || !test.annotated()) {
    throw std::runtime_error("regression protocols require annotated splits");
  }
  Dataset::require_disjoint(train, test);
  const auto mode = cfg.eval_mode == "argmax" ? DetectMode::argmax : DetectMode::softargmax;
  const auto norm = cfg.eval_normalization == "mse" ? ErrorNorm::mse : ErrorNorm::nme;

  auto disc_train = discover_all(detector, train, mode);
  auto disc_test = discover_all(detector, test, mode);
  auto ann_train = stack_annotations(train);
  auto ann_test = stack_annotations(test);
  auto iod = inter_ocular_distances(ann_test, cfg.anchor_a, cfg.anchor_b);

  // Fixed fitting order under the seed.
  std::vector<int64_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(seed, 0xf17);
  std::shuffle(order.begin(), order.end(), rng);
  auto idx = torch::tensor(order, torch::kInt64);
  disc_train = disc_train.index_select(0, idx);
  ann_train = ann_train.index_select(0, idx);

  EvalReport report;
  report.protocol = direction == Direction::forward ? "forward" : "backward";
  report.regime = regime_label;
  report.dataset_id = test.split();
  report.seed = seed;
  report.config_hash = cfg.config_hash();
  report.normalization = cfg.eval_normalization;

  for (const auto& label : cfg.eval_n_im) {
    int64_t n = label == "all" ? train.size() : std::stoll(label);
    if (n > train.size()) continue;  // grid truncated to dataset size
    auto model = fit_regressor(disc_train, ann_train, n, direction);
    auto src_test = direction == Direction::forward ? disc_test : ann_test;
    auto dst_test = direction == Direction::forward ? ann_test : disc_test;
    auto res = regression_error(model, src_test, dst_test, iod, norm);
    report.rows.emplace_back(label, res.error);
    report.excluded += res.excluded;
    report.ridge_used = report.ridge_used || model.ridge_used;
  }
  return report;
}

EvalReport run_consistency_protocol(LandmarkDetector& detector, const Dataset& test,
                                    const RunConfig& cfg, uint64_t seed,
                                    const std::string& regime_label) {
  const auto mode = cfg.eval_mode == "argmax" ? DetectMode::argmax : DetectMode::softargmax;
  auto res = consistency_error(detector, test, cfg.aug, cfg.eval_trials, seed, mode);
  EvalReport report;
  report.protocol = "consistency";
  report.regime = regime_label;
  report.dataset_id = test.split();
  report.seed = seed;
  report.config_hash = cfg.config_hash();
  report.normalization = "percent-width";
  for (size_t i = 0; i < res.per_point.size(); ++i) {
    report.rows.emplace_back("p" + std::to_string(i + 1), res.per_point[i]);
  }
  report.rows.emplace_back("mean", res.mean);
  report.excluded = res.excluded;
  return report;
}

}  // namespace lmk
