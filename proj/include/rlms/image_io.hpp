#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "rlms/tensor.hpp"

namespace rlms {

// Reads PNG or binary PPM/PGM into [1, 3, H, W] in [0, 1]; grayscale is
// channel-tripled. Throws DataError when the file is missing or malformed.
Tensor<float> read_image(const std::filesystem::path& path);

// 8-bit RGB PNG with pixel = round(value * 255) clamped to [0, 255].
void write_png(const std::filesystem::path& path, const Tensor<float>& image);

// Center crop to the largest size divisible by 4 (warns when it crops).
Tensor<float> crop_to_multiple_of_4(const Tensor<float>& image, const std::string& label);

// Center crop to exactly h x w; the image must be at least that large.
Tensor<float> center_crop(const Tensor<float>& image, std::size_t h, std::size_t w);

// Bilinear resize so the image covers h x w, then center crop to h x w.
Tensor<float> resize_cover(const Tensor<float>& image, std::size_t h, std::size_t w);

// Regular files with a .png, .ppm or .pgm extension, sorted by name.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace rlms
