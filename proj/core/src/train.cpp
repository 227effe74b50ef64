#include "lmk/train.hpp"

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "lmk/config.hpp"

namespace fs = std::filesystem;

namespace lmk {

void TrainingConfig::validate() const {
  if (K < 1) throw ConfigError("training: K must be >= 1");
  if (epochs < 0 || iters_per_epoch < 1 || batch_size < 1) {
    throw ConfigError("training: counts must be positive");
  }
  if (lr <= 0 || decay_factor <= 0 || decay_every < 1) throw ConfigError("training: bad schedule");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw ConfigError("training: bad betas");
  if (pixel_weight < 0 || perceptual_weight < 0) throw ConfigError("training: bad loss weights");
  if (workers < 1) throw ConfigError("training: workers must be >= 1");
  for (int l : perceptual_layers) {
    if (l < 0 || l > 3) throw ConfigError("training: perceptual layer index out of range");
  }
}

double lr_at_epoch(const TrainingConfig& cfg, int64_t epoch) {
  return cfg.lr * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

namespace {

struct Batch {
  torch::Tensor first;   // images (pretrain) or y (adapt)
  torch::Tensor second;  // target heatmaps (pretrain) or y' (adapt)
};

// Single-producer bounded queue feeding batches to the training loop.
class BatchQueue {
 public:
  explicit BatchQueue(size_t capacity) : capacity_(capacity) {}

  void push(Batch b) {
    std::unique_lock lk(m_);
    cv_free_.wait(lk, [&] { return q_.size() < capacity_ || stop_; });
    if (stop_) return;
    q_.push_back(std::move(b));
    cv_avail_.notify_one();
  }

  bool pop(Batch& out) {
    std::unique_lock lk(m_);
    cv_avail_.wait(lk, [&] { return !q_.empty() || done_ || stop_; });
    if (q_.empty()) return false;
    out = std::move(q_.front());
    q_.pop_front();
    cv_free_.notify_one();
    return true;
  }

  void finish() {
    std::lock_guard lk(m_);
    done_ = true;
    cv_avail_.notify_all();
  }

  void stop() {
    std::lock_guard lk(m_);
    stop_ = true;
    cv_avail_.notify_all();
    cv_free_.notify_all();
  }

 private:
  size_t capacity_;
  std::mutex m_;
  std::condition_variable cv_avail_, cv_free_;
  std::deque<Batch> q_;
  bool done_ = false, stop_ = false;
};

class CsvLogger {
 public:
  CsvLogger(const std::string& path, bool append) {
    os_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!os_) throw std::runtime_error("cannot open log '" + path + "'");
    if (!append) os_ << "step,loss,pixel,perceptual,lr\n";
  }
  void log(int64_t step, double loss, double pixel, double perceptual, double lr) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g\n",
                  static_cast<long long>(step), loss, pixel, perceptual, lr);
    os_ << buf;
    os_.flush();
  }

 private:
  std::ofstream os_;
};

// Epoch-indexed permutation stream over dataset indices.
class IndexStream {
 public:
  IndexStream(int64_t n, uint64_t seed, int64_t epoch, int64_t worker)
      : n_(n), rng_(make_rng(seed, (static_cast<uint64_t>(worker) << 32) ^
                                        static_cast<uint64_t>(epoch))) {
    refill();
  }
  int64_t next() {
    if (pos_ >= n_) refill();
    return order_[pos_++];
  }
  Rng& rng() { return rng_; }

 private:
  void refill() {
    order_.resize(n_);
    for (int64_t i = 0; i < n_; ++i) order_[i] = i;
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }
  int64_t n_, pos_ = 0;
  std::vector<int64_t> order_;
  Rng rng_;
};

RunPaths make_paths(const std::string& run_dir) {
  fs::create_directories(run_dir);
  RunPaths p;
  p.run_dir = run_dir;
  p.log_csv = (fs::path(run_dir) / "log.csv").string();
  p.latest_checkpoint = (fs::path(run_dir) / "ckpt-latest.bin").string();
  p.manifest = (fs::path(run_dir) / "manifest.txt").string();
  return p;
}

void save_epoch_checkpoint(const RunPaths& paths, Checkpoint ckpt, int64_t epoch) {
  char name[64];
  std::snprintf(name, sizeof(name), "ckpt-e%04lld.bin", static_cast<long long>(epoch));
  const auto numbered = (fs::path(paths.run_dir) / name).string();
  save_checkpoint(numbered, ckpt);
  fs::copy_file(numbered, paths.latest_checkpoint, fs::copy_options::overwrite_existing);
}

// Supervised targets: augment image and annotations together; augmentations
// that push a point off the image are re-drawn (the sample is never dropped).
Batch build_supervised_batch(const Dataset& ds, IndexStream& stream, int64_t batch_size,
                             const TransformRanges& aug, int64_t k) {
  std::vector<torch::Tensor> images, targets;
  images.reserve(batch_size);
  targets.reserve(batch_size);
  for (int64_t b = 0; b < batch_size; ++b) {
    const int64_t i = stream.next();
    auto img = ds.image(i);
    auto pts = ds.annotations(i);
    if (pts.size(0) != k) {
      throw std::runtime_error("pretrain: dataset has " + std::to_string(pts.size(0)) +
                               " points per sample but config K=" + std::to_string(k));
    }
    SimilarityTransform t = SimilarityTransform::identity();
    for (int attempt = 0; attempt < 10; ++attempt) {
      auto cand = sample_transform(aug, stream.rng());
      auto moved = transform_points(pts, cand);
      auto u = moved.select(-1, 0), v = moved.select(-1, 1);
      const bool ok = !((u < 0) | (u > kImageSize - 1) | (v < 0) | (v > kImageSize - 1))
                           .any().item<bool>();
      if (ok) {
        t = cand;
        break;
      }
    }
    auto warped = warp(img, t);
    auto moved = transform_points(pts, t).to(torch::kFloat32) / static_cast<double>(kStride);
    images.push_back(warped);
    targets.push_back(render_gaussians_xy(moved, kDefaultSigmaSq, kHeatmapSize, kHeatmapSize));
  }
  return Batch{torch::stack(images), torch::stack(targets)};
}

Batch build_pair_batch(const Dataset& ds, IndexStream& stream, int64_t batch_size,
                       const TransformRanges& aug) {
  std::vector<torch::Tensor> ys, yps;
  ys.reserve(batch_size);
  yps.reserve(batch_size);
  for (int64_t b = 0; b < batch_size; ++b) {
    auto pair = make_pair(ds.image(stream.next()), aug, stream.rng());
    ys.push_back(pair.y);
    yps.push_back(pair.y_prime);
  }
  return Batch{torch::stack(ys), torch::stack(yps)};
}

Batch build_temporal_batch(const Clip& clip, IndexStream& stream, int64_t batch_size,
                           const TransformRanges& aug, int64_t window, bool flip) {
  std::vector<torch::Tensor> ys, yps;
  for (int64_t b = 0; b < batch_size; ++b) {
    auto pair = make_pair_temporal(clip, stream.next(), window, flip, aug, stream.rng());
    ys.push_back(pair.y);
    yps.push_back(pair.y_prime);
  }
  return Batch{torch::stack(ys), torch::stack(yps)};
}

double holdout_detection_error(LandmarkDetector& det, const Dataset& ds) {
  torch::NoGradGuard g;
  det->eval();
  double total = 0.0;
  int64_t count = 0;
  const int64_t bs = 32;
  for (int64_t i = 0; i < ds.size(); i += bs) {
    const int64_t hi = std::min(ds.size(), i + bs);
    std::vector<torch::Tensor> imgs, anns;
    for (int64_t j = i; j < hi; ++j) {
      imgs.push_back(ds.image(j));
      anns.push_back(ds.annotations(j));
    }
    auto pts = det->detect(torch::stack(imgs), DetectMode::softargmax);
    auto px = pts.points.to(torch::kFloat64) * static_cast<double>(kStride);
    auto err = (px - torch::stack(anns)).norm(2, -1);  // (B, K)
    total += err.sum().item<double>();
    count += err.numel();
  }
  det->train();
  return total / std::max<int64_t>(1, count);
}

}  // namespace

TrainResult pretrain_core(const Dataset& train, const Dataset* holdout, const RunConfig& cfg,
                          const std::string& run_dir) {
  cfg.validate();
  const auto& tc = cfg.training;
  if (!train.annotated()) throw std::runtime_error("pretrain requires an annotated dataset");
  if (train.points_per_sample() != tc.K) {
    throw std::runtime_error("pretrain: annotation count " +
                             std::to_string(train.points_per_sample()) +
                             " does not match config K=" + std::to_string(tc.K));
  }

  torch::manual_seed(tc.seed);
  auto det_cfg = cfg.detector;
  det_cfg.projected = false;
  det_cfg.K = tc.K;
  LandmarkDetector detector(det_cfg);
  detector->train();

  auto paths = make_paths(run_dir);
  write_manifest(paths.manifest, cfg, cfg.command_line);
  CsvLogger logger(paths.log_csv, /*append=*/false);
  torch::optim::Adam opt(detector->parameters(),
                         torch::optim::AdamOptions(tc.lr).betas({tc.beta1, tc.beta2}));

  BatchQueue queue(3);
  std::thread producer([&] {
    try {
      for (int64_t e = 0; e < tc.epochs; ++e) {
        IndexStream stream(train.size(), tc.seed, e, 0);
        for (int64_t it = 0; it < tc.iters_per_epoch; ++it) {
          queue.push(build_supervised_batch(train, stream, tc.batch_size, cfg.aug, tc.K));
        }
      }
    } catch (...) {
    }
    queue.finish();
  });

  int64_t step = 0;
  double last_loss = 0.0;
  for (int64_t e = 0; e < tc.epochs; ++e) {
    const double lr = lr_at_epoch(tc, e);
    for (auto& group : opt.param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
    double epoch_loss = 0.0;
    for (int64_t it = 0; it < tc.iters_per_epoch; ++it) {
      Batch batch;
      if (!queue.pop(batch)) throw std::runtime_error("pretrain: batch producer stopped early");
      opt.zero_grad();
      HeatmapStack pred{detector->forward(batch.first), HeatmapKind::raw};
      HeatmapStack target{batch.second, HeatmapKind::gaussian};
      auto loss = supervised_loss(pred, target);
      loss.backward();
      opt.step();
      last_loss = loss.item<double>();
      epoch_loss += last_loss;
      ++step;
      logger.log(step, last_loss, last_loss, 0.0, lr);
    }
    std::cout << "[pretrain] epoch " << e + 1 << "/" << tc.epochs
              << " loss=" << epoch_loss / tc.iters_per_epoch << std::endl;
    if (tc.checkpoint_every > 0 && (e + 1) % tc.checkpoint_every == 0) {
      save_epoch_checkpoint(paths, snapshot(detector, nullptr, Regime::pretrain,
                                            cfg.config_hash(), e, step), e);
    }
  }
  producer.join();

  auto final_ckpt = snapshot(detector, nullptr, Regime::pretrain, cfg.config_hash(),
                             std::max<int64_t>(0, tc.epochs - 1), step);
  save_checkpoint(paths.latest_checkpoint, final_ckpt);

  TrainResult res;
  res.paths = paths;
  res.final_loss = last_loss;
  res.steps = step;
  if (holdout) {
    Dataset::require_disjoint(train, *holdout);
    res.holdout_error_px = holdout_detection_error(detector, *holdout);
    std::cout << "[pretrain] holdout detection error " << res.holdout_error_px << " px"
              << std::endl;
  }
  return res;
}

TrainResult adapt(const Checkpoint* core, const Dataset& unlabeled, const RunConfig& cfg,
                  const std::string& run_dir, bool resume) {
  cfg.validate();
  const auto& tc = cfg.training;
  if (tc.regime == Regime::pretrain) {
    throw ConfigError("adapt: regime must be scratch, finetune, or proposed");
  }
  if ((tc.regime == Regime::proposed || tc.regime == Regime::finetune) && core == nullptr) {
    throw std::runtime_error("core checkpoint required for the " + to_string(tc.regime) +
                             " regime");
  }

  torch::manual_seed(tc.seed);
  auto det_cfg = cfg.detector;
  det_cfg.K = tc.K;
  det_cfg.projected = tc.regime == Regime::proposed;
  if (core) {
    // Trunk shape comes from the core checkpoint; K stays domain-specific.
    det_cfg.stem_channels = core->detector_config.stem_channels;
    det_cfg.trunk_channels = core->detector_config.trunk_channels;
    det_cfg.hg_levels = core->detector_config.hg_levels;
  }
  LandmarkDetector detector(det_cfg);
  if (core) load_core_into(detector, *core, /*copy_head=*/false);

  auto gen_cfg = cfg.generator;
  gen_cfg.K = tc.K;
  GeneratorNet generator(gen_cfg);

  std::optional<FeatureExtractor> fx;
  if (tc.perceptual_weight > 0.0) {
    fx.emplace(tc.vgg_weights);  // missing weights throw here, never fall back
  }

  detector->train();
  generator->train();

  std::vector<torch::Tensor> trainables = detector->parameters();
  auto gp = generator->parameters();
  trainables.insert(trainables.end(), gp.begin(), gp.end());
  torch::optim::Adam opt(trainables,
                         torch::optim::AdamOptions(tc.lr).betas({tc.beta1, tc.beta2}));

  auto paths = make_paths(run_dir);
  int64_t start_epoch = 0, step = 0;
  if (resume && fs::exists(paths.latest_checkpoint)) {
    auto ckpt = load_checkpoint(paths.latest_checkpoint);
    if (ckpt.regime != tc.regime) {
      throw std::runtime_error("resume: checkpoint regime " + to_string(ckpt.regime) +
                               " does not match configured " + to_string(tc.regime));
    }
    install(detector, ckpt);
    install_generator(generator, ckpt);
    if (auto it = ckpt.blobs.find("opt"); it != ckpt.blobs.end()) {
      load_optimizer_blob(opt, it->second);
    }
    start_epoch = ckpt.epoch + 1;
    step = ckpt.step;
  } else {
    write_manifest(paths.manifest, cfg, cfg.command_line);
  }
  CsvLogger logger(paths.log_csv, /*append=*/start_epoch > 0);

  const bool temporal = cfg.data_mode == "temporal";
  Clip clip;
  if (temporal) {
    for (int64_t i = 0; i < unlabeled.size(); ++i) clip.frames.push_back(unlabeled.image(i));
  }

  BatchQueue queue(3);
  std::thread producer([&] {
    try {
      for (int64_t e = start_epoch; e < tc.epochs; ++e) {
        IndexStream stream(unlabeled.size(), tc.seed, e, 0);
        for (int64_t it = 0; it < tc.iters_per_epoch; ++it) {
          queue.push(temporal
                         ? build_temporal_batch(clip, stream, tc.batch_size, cfg.aug,
                                                cfg.temporal_window, cfg.temporal_flip)
                         : build_pair_batch(unlabeled, stream, tc.batch_size, cfg.aug));
        }
      }
    } catch (...) {
    }
    queue.finish();
  });

  TotalLossOptions lopt;
  lopt.pixel_weight = tc.pixel_weight;
  lopt.perceptual_weight = tc.perceptual_weight;
  lopt.perceptual_layers = tc.perceptual_layers;

  double last_loss = 0.0;
  for (int64_t e = start_epoch; e < tc.epochs; ++e) {
    const double lr = lr_at_epoch(tc, e);
    for (auto& group : opt.param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
    double epoch_loss = 0.0;
    for (int64_t it = 0; it < tc.iters_per_epoch; ++it) {
      Batch batch;
      if (!queue.pop(batch)) throw std::runtime_error("adapt: batch producer stopped early");
      opt.zero_grad();
      torch::Tensor pix, per, loss;
      if (fx) {
        auto parts = total_loss(batch.first, batch.second, detector, generator, *fx, lopt);
        loss = parts.total;
        pix = parts.pixel;
        per = parts.perceptual;
      } else {
        HeatmapStack raw{detector->forward(batch.first), HeatmapKind::raw};
        auto cond = render_gaussians(softargmax(raw, lopt.beta), lopt.sigma_sq);
        auto recon = generate(generator, batch.second, cond);
        pix = pixel_loss(recon, batch.first);
        per = torch::zeros({});
        loss = tc.pixel_weight * pix;
      }
      loss.backward();
      opt.step();
      last_loss = loss.item<double>();
      epoch_loss += last_loss;
      ++step;
      logger.log(step, last_loss, pix.item<double>(), per.item<double>(), lr);
    }
    std::cout << "[adapt:" << to_string(tc.regime) << "] epoch " << e + 1 << "/" << tc.epochs
              << " loss=" << epoch_loss / tc.iters_per_epoch << std::endl;
    const bool periodic = tc.checkpoint_every > 0 && (e + 1) % tc.checkpoint_every == 0;
    if (periodic || e + 1 == tc.epochs) {
      auto ckpt = snapshot(detector, &generator, tc.regime, cfg.config_hash(), e, step);
      ckpt.blobs["opt"] = optimizer_blob(opt);
      save_epoch_checkpoint(paths, std::move(ckpt), e);
    }
  }
  producer.join();

  if (tc.epochs == 0 || start_epoch >= tc.epochs) {
    auto ckpt = snapshot(detector, &generator, tc.regime, cfg.config_hash(),
                         std::max<int64_t>(0, tc.epochs - 1), step);
    save_checkpoint(paths.latest_checkpoint, ckpt);
  }

  TrainResult res;
  res.paths = paths;
  res.final_loss = last_loss;
  res.steps = step;
  return res;
}

}  // namespace lmk
