#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace textboot {

/// 8-bit grayscale image, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary PGM (P5, maxval 255). Throws IoError / ParseError.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);
/// Reads only the header; returns {width, height}.
std::pair<int, int> pgm_dimensions(const std::filesystem::path& path);

} // namespace textboot
