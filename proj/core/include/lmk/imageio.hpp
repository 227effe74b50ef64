#pragma once

#include <torch/torch.h>

#include <string>

namespace lmk {

/// Binary PPM (P6, maxval 255). Images are (3, H, W) float in [0, 1];
/// the 8-bit quantization is round(x * 255).
void write_ppm(const std::string& path, const torch::Tensor& image);
torch::Tensor read_ppm(const std::string& path);

/// uint8 (3, H, W) variants used by in-memory datasets.
torch::Tensor to_u8(const torch::Tensor& float_image);
torch::Tensor to_float(const torch::Tensor& u8_image);
void write_ppm_u8(const std::string& path, const torch::Tensor& u8_image);
torch::Tensor read_ppm_u8(const std::string& path);

}  // namespace lmk
