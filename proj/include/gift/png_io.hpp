#pragma once

#include "gift/image.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gift {

// 8-bit RGB PNG at the file boundary; value v maps to round(v * 255).
void savePng(const FaceImage& img, const std::filesystem::path& path);
FaceImage loadPng(const std::filesystem::path& path);

// In-memory variants used by the API clients (deterministic encoding).
std::vector<unsigned char> encodePng(const FaceImage& img);
FaceImage decodePng(const unsigned char* data, std::size_t size);

}  // namespace gift
