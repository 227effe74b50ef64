#include "lmk/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lmk/imageio.hpp"

namespace fs = std::filesystem;

namespace lmk {

Dataset Dataset::from_toy(const std::vector<ToySample>& samples, std::string split) {
  Dataset ds;
  ds.split_ = std::move(split);
  for (const auto& s : samples) {
    ds.ids_.push_back(s.id);
    ds.images_u8_.push_back(s.image_u8);
    ds.annotations_.push_back(s.centers);
  }
  return ds;
}

Dataset Dataset::load(const std::string& root, const std::string& split) {
  Dataset ds;
  ds.split_ = split;
  fs::path dir = fs::path(root) / split;
  fs::path ann_path = dir / "annotations.csv";
  if (!fs::exists(ann_path)) {
    throw std::runtime_error("dataset: missing '" + ann_path.string() + "'");
  }
  std::ifstream ann(ann_path);
  std::string line;
  std::optional<int64_t> points;
  while (std::getline(ann, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::getline(ls, field, ',');
    const std::string id = field;
    std::vector<double> coords;
    while (std::getline(ls, field, ',')) coords.push_back(std::stod(field));
    if (coords.size() % 2 != 0) {
      throw std::runtime_error("dataset: odd coordinate count for id '" + id + "'");
    }
    const int64_t m = static_cast<int64_t>(coords.size()) / 2;
    if (points && *points != m) {
      throw std::runtime_error("dataset: inconsistent point count at id '" + id + "'");
    }
    points = m;
    auto pts = torch::empty({m, 2}, torch::kFloat64);
    std::memcpy(pts.data_ptr<double>(), coords.data(), coords.size() * sizeof(double));
    if (m > 0 && !pts.isfinite().all().item<bool>()) {
      throw std::runtime_error("dataset: non-finite annotation for id '" + id + "'");
    }
    auto img = read_ppm_u8((dir / "images" / (id + ".ppm")).string());
    ds.ids_.push_back(id);
    ds.images_u8_.push_back(img);
    ds.annotations_.push_back(pts);
  }
  if (ds.ids_.empty()) throw std::runtime_error("dataset: empty split '" + split + "'");
  return ds;
}

int64_t Dataset::points_per_sample() const {
  return annotations_.empty() ? 0 : annotations_.front().size(0);
}

bool Dataset::annotated() const { return points_per_sample() > 0; }

AnnotatedSample Dataset::get(int64_t index) const {
  return AnnotatedSample{ids_.at(index), image(index), annotations_.at(index), split_};
}

torch::Tensor Dataset::image(int64_t index) const {
  auto img = to_float(images_u8_.at(index));
  return img;
}

torch::Tensor Dataset::annotations(int64_t index) const { return annotations_.at(index); }

void Dataset::require_disjoint(const Dataset& a, const Dataset& b) {
  std::set<std::string> ids(a.ids().begin(), a.ids().end());
  for (const auto& id : b.ids()) {
    if (ids.count(id)) {
      throw std::runtime_error("split discipline violation: id '" + id +
                               "' appears in both '" + a.split() + "' and '" + b.split() + "'");
    }
  }
}

TrainingPair make_pair(const torch::Tensor& image, const TransformRanges& ranges, Rng& rng) {
  auto a_self = sample_transform(ranges, rng);
  auto a_pair = sample_transform(ranges, rng);
  TrainingPair p;
  p.y = warp(image, a_self);
  p.y_prime = warp(p.y, a_pair);
  p.a = a_pair;
  p.mode = PairMode::warp;
  return p;
}

TrainingPair make_pair_temporal(const Clip& clip, int64_t anchor, int64_t window,
                                bool flip_enabled, const TransformRanges& ranges, Rng& rng) {
  if (clip.frames.empty()) throw std::invalid_argument("make_pair_temporal: empty clip");
  const int64_t n = static_cast<int64_t>(clip.frames.size());
  if (anchor < 0 || anchor >= n) throw std::invalid_argument("make_pair_temporal: bad anchor");
  const int64_t lo = std::max<int64_t>(0, anchor - window);
  const int64_t hi = std::min<int64_t>(n - 1, anchor + window);
  std::uniform_int_distribution<int64_t> pick(lo, hi);
  const int64_t other = pick(rng);

  TrainingPair p;
  p.mode = PairMode::temporal;
  auto y = clip.frames[anchor];
  auto yp = clip.frames[other];
  if (flip_enabled) {
    std::uniform_int_distribution<int> coin(0, 1);
    if (coin(rng) == 1) {
      // synchronized: both or neither
      y = y.flip(-1);
      yp = yp.flip(-1);
      p.flipped = true;
    }
  }
  p.y = warp(y, sample_transform(ranges, rng));
  auto a_prime = sample_transform(ranges, rng);
  p.y_prime = warp(yp, a_prime);
  p.a = a_prime;
  return p;
}

}  // namespace lmk
