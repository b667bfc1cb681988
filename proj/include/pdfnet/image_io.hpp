#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pdfnet::img {

// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels.
struct Image8 {
    int h = 0;
    int w = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * w + x) * channels + c];
    }
};

// Decodes a PNG or JPEG file (detected by signature). Palette/16-bit/alpha
// inputs are normalized to plain 8-bit gray or RGB. Throws std::runtime_error
// on unreadable or corrupt files.
Image8 read_image(const std::string& path);

Image8 to_gray(const Image8& im);
Image8 to_rgb(const Image8& im);

void write_png(const std::string& path, const Image8& im);

}  // namespace pdfnet::img
