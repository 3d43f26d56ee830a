#pragma once

#include "visor/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace visor {

using Bytes = std::vector<std::uint8_t>;

Bytes encode_png(const RgbImage& image);
RgbImage decode_png(const Bytes& png);

/// 16-bit grayscale PNG of depth in millimeters, saturating at 65535.
Bytes encode_depth_png(const DepthImage& depth);

std::string base64_encode(const Bytes& data);
/// Throws Error on malformed input.
Bytes base64_decode(const std::string& text);

void write_file(const std::filesystem::path& path, const Bytes& data);
void write_text(const std::filesystem::path& path, const std::string& text);
Bytes read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace visor
