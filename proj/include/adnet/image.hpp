#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adnet/tensor.hpp"

namespace adnet {

// Interleaved 8-bit RGB raster.
struct ImageU8 {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb; // height * width * 3

    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
        return rgb[(y * width + x) * 3 + c];
    }
};

// Sniffs PNG/JPEG by magic bytes. Grayscale sources replicate into the three
// channels; palette and 16-bit PNGs are widened to 8-bit RGB.
ImageU8 decode_image(const std::string& path);

void write_png_rgb(const std::string& path, const ImageU8& image);

// Single-channel 8-bit PNG (height*width bytes).
void write_png_gray(const std::string& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& gray);

void write_jpeg_rgb(const std::string& path, const ImageU8& image, int quality = 95);

// Interleaved bytes -> channel-major planes in [0,1] (divide by 255).
template <typename T>
Tensor<T> image_to_planes(const ImageU8& image);

// Bilinear resampling of a [c,h,w] tensor, pixel-center aligned.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& chw, std::size_t out_h, std::size_t out_w);

} // namespace adnet
