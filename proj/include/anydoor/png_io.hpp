#pragma once

#include <filesystem>

#include "anydoor/image.hpp"

namespace anydoor::io {

// 8-bit PNG boundary: pixel values v map to v / 255 on read and
// round(clamp(x, 0, 1) * 255) on write.

/// Reads an RGB (or gray, expanded to RGB) PNG.
ImageBuffer read_rgb(const std::filesystem::path& path);

/// Reads a single-channel mask PNG; any nonzero pixel is set.
BinaryMask read_mask(const std::filesystem::path& path);

/// Reads a single-channel PNG as raw 8-bit labels (instance id per pixel).
Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic> read_labels(const std::filesystem::path& path);

/// Writes raw 8-bit labels (0 = background).
void write_labels(const std::filesystem::path& path,
                  const Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic>& labels);

void write_image(const std::filesystem::path& path, const ImageBuffer& img);

/// Writes 0/255.
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

std::uint8_t quantize(double v);

/// The image as it will read back after a write.
ImageBuffer quantized(const ImageBuffer& img);

}  // namespace anydoor::io
