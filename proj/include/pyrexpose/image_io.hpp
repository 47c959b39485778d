#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pyrexpose/image.hpp"

namespace pyrexpose {

// 8-bit RGB PNG and binary PPM (P6). Samples map to [0,1] by /255; saving
// clamps to [0,1] and rounds to the nearest 8-bit level. The format is
// sniffed from the file contents on load and chosen by extension on save.
Image load_image(const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);

std::uint8_t quantize8(float v);

}  // namespace pyrexpose
