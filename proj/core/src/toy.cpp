#include "lmk/toy.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "lmk/imageio.hpp"

namespace fs = std::filesystem;

namespace lmk {

std::string to_string(ToyFamily f) { return f == ToyFamily::A ? "A" : "B"; }

ToyFamily toy_family_from_string(const std::string& s) {
  if (s == "A" || s == "a") return ToyFamily::A;
  if (s == "B" || s == "b") return ToyFamily::B;
  throw ConfigError("unknown toy family '" + s + "' (expected A or B)");
}

namespace {

constexpr int kSize = 128;

struct Rgb {
  float r, g, b;
};

Rgb hsv(float h, float s, float v) {
  h = std::fmod(h, 360.0f) / 60.0f;
  const int i = static_cast<int>(h);
  const float f = h - i;
  const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

std::array<Rgb, kToyParts> palette(ToyFamily f) {
  std::array<Rgb, kToyParts> out;
  for (int j = 0; j < kToyParts; ++j) {
    if (f == ToyFamily::A) {
      out[j] = hsv(36.0f * j, 0.92f, 0.95f);
    } else {
      out[j] = hsv(18.0f + 36.0f * j, 0.60f, 0.75f);
    }
  }
  return out;
}

// Cheap deterministic per-pixel hash noise.
float hash_noise(uint64_t seed, int x, int y) {
  uint64_t h = seed ^ (uint64_t(x) * 0x9e3779b97f4a7c15ULL) ^ (uint64_t(y) * 0xc2b2ae3d27d4eb4fULL);
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return (h % 10007) / 10007.0f - 0.5f;
}

struct Part {
  double cx, cy;      // center, pixels
  double size;        // characteristic radius / half-size
  double angle;       // shape orientation
  int shape;          // 0 disc, 1 square, 2 triangle
};

struct Pose {
  std::array<Part, kToyParts> parts;
};

Pose sample_pose(ToyFamily f, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Pose pose;
  const double cx = 48 + 32 * u01(rng);
  const double cy = 48 + 32 * u01(rng);
  const double phi = 2 * M_PI * u01(rng);
  const double s = 0.85 + 0.30 * u01(rng);
  for (int j = 0; j < kToyParts; ++j) {
    const double aj = 0.12 * (u01(rng) - 0.5);   // articulation jitter, angle
    const double rj = 1.0 + 0.12 * (u01(rng) - 0.5);  // radial jitter
    double ang, rad;
    Part p;
    if (f == ToyFamily::A) {
      // ten discs on a two-radius star
      ang = phi + 2 * M_PI * j / kToyParts + aj;
      rad = s * (j % 2 == 0 ? 30.0 : 19.0) * rj;
      p.shape = 0;
      p.size = s * (4.2 + 0.25 * ((j * 3) % 5));
    } else {
      // squares and triangles along a spiral chain
      ang = phi + (M_PI / 6.0) * j + aj;
      rad = s * (12.0 + 2.4 * j) * rj;
      p.shape = j % 2 == 0 ? 1 : 2;
      p.size = s * (3.9 + 0.18 * j);
    }
    p.cx = cx + rad * std::cos(ang);
    p.cy = cy + rad * std::sin(ang);
    p.angle = ang + 0.8 * (u01(rng) - 0.5);
    pose.parts[j] = p;
  }
  return pose;
}

// Signed distance to the part boundary (negative inside).
double part_sdf(const Part& p, double x, double y) {
  const double dx = x - p.cx, dy = y - p.cy;
  switch (p.shape) {
    case 0:
      return std::sqrt(dx * dx + dy * dy) - p.size;
    case 1: {
      const double ca = std::cos(-p.angle), sa = std::sin(-p.angle);
      const double lx = ca * dx - sa * dy, ly = sa * dx + ca * dy;
      return std::max(std::abs(lx), std::abs(ly)) - p.size;
    }
    default: {
      // equilateral triangle, circumradius ~1.3 * size
      const double R = 1.3 * p.size;
      double sd = -1e9;
      for (int e = 0; e < 3; ++e) {
        const double a0 = p.angle + M_PI / 2 + 2 * M_PI * e / 3;
        const double a1 = p.angle + M_PI / 2 + 2 * M_PI * (e + 1) / 3;
        const double v0x = p.cx + R * std::cos(a0), v0y = p.cy + R * std::sin(a0);
        const double v1x = p.cx + R * std::cos(a1), v1y = p.cy + R * std::sin(a1);
        const double ex = v1x - v0x, ey = v1y - v0y;
        const double len = std::sqrt(ex * ex + ey * ey);
        // outward normal of edge
        const double nx = ey / len, ny = -ex / len;
        sd = std::max(sd, nx * (x - v0x) + ny * (y - v0y));
      }
      return sd;
    }
  }
}

struct Background {
  Rgb c0, c1;
  double gx, gy, fx, fy, phase, stripe_amp;
  uint64_t noise_seed;
};

Background sample_background(ToyFamily f, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Background bg;
  if (f == ToyFamily::A) {
    bg.c0 = hsv(200 + 40 * u01(rng), 0.25f, 0.30f + 0.15f * u01(rng));
    bg.c1 = hsv(220 + 40 * u01(rng), 0.20f, 0.55f + 0.15f * u01(rng));
  } else {
    bg.c0 = hsv(70 + 40 * u01(rng), 0.30f, 0.35f + 0.15f * u01(rng));
    bg.c1 = hsv(30 + 40 * u01(rng), 0.25f, 0.60f + 0.15f * u01(rng));
  }
  bg.gx = (u01(rng) - 0.5) * 1.6;
  bg.gy = (u01(rng) - 0.5) * 1.6;
  bg.fx = 1.0 + 5.0 * u01(rng);
  bg.fy = 1.0 + 5.0 * u01(rng);
  bg.phase = 2 * M_PI * u01(rng);
  bg.stripe_amp = 0.05 + 0.08 * u01(rng);
  std::uniform_int_distribution<uint64_t> du;
  bg.noise_seed = du(rng);
  return bg;
}

ToySample render(uint64_t seed, int64_t index, ToyFamily family) {
  auto rng = make_rng(seed ^ (family == ToyFamily::A ? 0xA11CEULL : 0xB0B0ULL),
                      static_cast<uint64_t>(index));
  const auto colors = palette(family);

  Pose pose;
  bool ok = false;
  for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
    pose = sample_pose(family, rng);
    ok = true;
    for (int j = 0; j < kToyParts && ok; ++j) {
      const auto& p = pose.parts[j];
      if (p.cx < 2 || p.cx > kSize - 3 || p.cy < 2 || p.cy > kSize - 3) ok = false;
      // the center must stay topmost: no later part may cover it
      for (int k = j + 1; k < kToyParts && ok; ++k) {
        if (part_sdf(pose.parts[k], p.cx, p.cy) < 1.0) ok = false;
      }
    }
  }
  if (!ok) throw std::runtime_error("toy_corpus: could not find a non-occluding pose");

  const auto bg = sample_background(family, rng);
  auto img = torch::empty({3, kSize, kSize}, torch::kFloat32);
  auto acc = img.accessor<float, 3>();
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      double t = 0.5 + bg.gx * (x - 64) / 128.0 + bg.gy * (y - 64) / 128.0 +
                 bg.stripe_amp * std::sin(2 * M_PI * (bg.fx * x + bg.fy * y) / 128.0 + bg.phase);
      t = std::clamp(t, 0.0, 1.0);
      const float n = 0.03f * hash_noise(bg.noise_seed, x, y);
      acc[0][y][x] = std::clamp(float(bg.c0.r + (bg.c1.r - bg.c0.r) * t) + n, 0.0f, 1.0f);
      acc[1][y][x] = std::clamp(float(bg.c0.g + (bg.c1.g - bg.c0.g) * t) + n, 0.0f, 1.0f);
      acc[2][y][x] = std::clamp(float(bg.c0.b + (bg.c1.b - bg.c0.b) * t) + n, 0.0f, 1.0f);
    }
  }
  // paint parts back-to-front with anti-aliased coverage
  for (int j = 0; j < kToyParts; ++j) {
    const auto& p = pose.parts[j];
    const auto& c = colors[j];
    const int pad = static_cast<int>(2.2 * p.size) + 3;
    const int x0 = std::max(0, int(p.cx) - pad), x1 = std::min(kSize - 1, int(p.cx) + pad);
    const int y0 = std::max(0, int(p.cy) - pad), y1 = std::min(kSize - 1, int(p.cy) + pad);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double sd = part_sdf(p, x, y);
        const float alpha = static_cast<float>(std::clamp(0.5 - sd, 0.0, 1.0));
        if (alpha <= 0.0f) continue;
        acc[0][y][x] = acc[0][y][x] * (1 - alpha) + c.r * alpha;
        acc[1][y][x] = acc[1][y][x] * (1 - alpha) + c.g * alpha;
        acc[2][y][x] = acc[2][y][x] * (1 - alpha) + c.b * alpha;
      }
    }
  }

  ToySample s;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%06lld", family == ToyFamily::A ? "a" : "b",
                static_cast<long long>(index));
  s.id = buf;
  s.image_u8 = to_u8(img);
  s.centers = torch::empty({kToyParts, 2}, torch::kFloat64);
  auto ca = s.centers.accessor<double, 2>();
  for (int j = 0; j < kToyParts; ++j) {
    ca[j][0] = pose.parts[j].cx;
    ca[j][1] = pose.parts[j].cy;
  }
  return s;
}

}  // namespace

std::vector<ToySample> toy_corpus(uint64_t seed, int64_t n_images, ToyFamily family) {
  if (n_images < 1) throw std::invalid_argument("toy_corpus: n_images must be >= 1");
  std::vector<ToySample> out;
  out.reserve(n_images);
  for (int64_t i = 0; i < n_images; ++i) out.push_back(render(seed, i, family));
  return out;
}

void write_toy_corpus(const std::string& out_dir, uint64_t seed, int64_t n_train,
                      int64_t n_test, ToyFamily family, bool force) {
  fs::path root(out_dir);
  if (fs::exists(root) && !fs::is_empty(root) && !force) {
    throw std::runtime_error("output directory '" + out_dir +
                             "' exists and is not empty (use --force to overwrite)");
  }
  auto write_split = [&](const std::string& split, int64_t offset, int64_t n) {
    fs::create_directories(root / split / "images");
    std::ofstream ann(root / split / "annotations.csv", std::ios::trunc);
    for (int64_t i = 0; i < n; ++i) {
      auto s = render(seed, offset + i, family);
      write_ppm_u8((root / split / "images" / (s.id + ".ppm")).string(), s.image_u8);
      ann << s.id;
      auto ca = s.centers.accessor<double, 2>();
      char buf[64];
      for (int j = 0; j < kToyParts; ++j) {
        std::snprintf(buf, sizeof(buf), ",%.4f,%.4f", ca[j][0], ca[j][1]);
        ann << buf;
      }
      ann << "\n";
    }
  };
  fs::create_directories(root);
  write_split("train", 0, n_train);
  if (n_test > 0) write_split("test", n_train, n_test);
  std::ofstream mf(root / "manifest.txt", std::ios::trunc);
  mf << "format=toy-corpus-v1\n"
     << "family=" << to_string(family) << "\n"
     << "seed=" << seed << "\n"
     << "n_train=" << n_train << "\n"
     << "n_test=" << n_test << "\n"
     << "points=" << kToyParts << "\n"
     << "anchors=0,1\n";
}

}  // namespace lmk
