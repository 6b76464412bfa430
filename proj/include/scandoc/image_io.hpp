#pragma once

#include <string>
#include <variant>

#include "scandoc/image.hpp"

namespace scandoc::img {

using AnyImage = std::variant<GrayImage, RgbImage>;

// Dispatches on file extension: .png, .pgm (P5), .ppm (P6).
AnyImage load_image(const std::string& path);
void save_gray(const std::string& path, const GrayImage& image);
void save_rgb(const std::string& path, const RgbImage& image);

// Gray view of any loaded image (converts RGB inputs).
GrayImage load_gray(const std::string& path);

}  // namespace scandoc::img
