#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <vector>

namespace mulgan {

/// [-1,1] -> [0,255] with round-half-away-from-zero, clamped.
std::uint8_t to_byte(float v);

/// Writes a (3,H,W) image in [-1,1] as 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

/// Reads an image file, center-crops to a square and resizes to `size`.
/// Returns (3,size,size) float32 in [-1,1].
torch::Tensor read_image(const std::filesystem::path& path, int size);

/// Tiles a grid of (3,H,W) images (rows of equal length; undefined tensors
/// render as blank cells) with `pad` pixels of white between cells.
torch::Tensor make_montage(const std::vector<std::vector<torch::Tensor>>& grid, int pad = 2);

}  // namespace mulgan
