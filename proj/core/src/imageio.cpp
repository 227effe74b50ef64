#include "lmk/imageio.hpp"

#include <fstream>

#include "lmk/common.hpp"

namespace lmk {

torch::Tensor to_u8(const torch::Tensor& img) {
  return (img.clamp(0, 1) * 255.0f).round().to(torch::kUInt8);
}

torch::Tensor to_float(const torch::Tensor& u8) {
  return u8.to(torch::kFloat32) / 255.0f;
}

void write_ppm_u8(const std::string& path, const torch::Tensor& u8) {
  if (u8.dim() != 3 || u8.size(0) != 3 || u8.dtype() != torch::kUInt8) {
    throw ShapeError("write_ppm expects a (3, H, W) uint8 image");
  }
  const int64_t h = u8.size(1), w = u8.size(2);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "P6\n" << w << " " << h << "\n255\n";
  auto hwc = u8.permute({1, 2, 0}).contiguous();  // interleave channels
  os.write(reinterpret_cast<const char*>(hwc.data_ptr<uint8_t>()), 3 * h * w);
  if (!os) throw std::runtime_error("short write to '" + path + "'");
}

void write_ppm(const std::string& path, const torch::Tensor& image) {
  write_ppm_u8(path, to_u8(image));
}

torch::Tensor read_ppm_u8(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::string magic;
  is >> magic;
  if (magic != "P6") throw std::runtime_error("'" + path + "' is not a binary PPM");
  auto next_token = [&is, &path]() {
    std::string tok;
    // PPM headers may carry '#' comments between tokens.
    while (is >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
    throw std::runtime_error("truncated PPM header in '" + path + "'");
  };
  const int64_t w = std::stoll(next_token());
  const int64_t h = std::stoll(next_token());
  const int64_t maxval = std::stoll(next_token());
  if (maxval != 255) throw std::runtime_error("unsupported PPM maxval in '" + path + "'");
  is.get();  // the single whitespace after the header
  auto hwc = torch::empty({h, w, 3}, torch::kUInt8);
  is.read(reinterpret_cast<char*>(hwc.data_ptr<uint8_t>()), 3 * h * w);
  if (!is) throw std::runtime_error("truncated PPM payload in '" + path + "'");
  return hwc.permute({2, 0, 1}).contiguous();
}

torch::Tensor read_ppm(const std::string& path) {
  return to_float(read_ppm_u8(path));
}

}  // namespace lmk
