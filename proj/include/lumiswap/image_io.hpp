#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lumiswap/image.hpp"

namespace lumiswap {

// Reads a PNG or JPEG (sniffed from the magic bytes) and scales 8-bit values
// by 1/255. Throws NotFoundError for a missing file, DecodeError otherwise.
ImageRGB load_image(const std::filesystem::path& path);
ImageRGB decode_image(std::span<const std::uint8_t> bytes, const std::string& label = "<memory>");

// 8-bit RGB PNG; values clamped to [0,1] and rounded to the nearest byte.
// The file appears atomically (temp file + rename).
void save_image(const ImageRGB& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const ImageRGB& img);

std::uint8_t to_byte(double value);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace lumiswap
