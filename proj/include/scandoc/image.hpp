#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace scandoc::img {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major, width*height intensities

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool operator==(const GrayImage&) const = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major, 3 bytes per pixel (R,G,B)

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }
};

enum class MorphOp { kDilate, kErode };

enum class RecipeName { kGray, kGrayDe, kGrayC20, kGrayC60, kGrayDeC20, kGrayDeC60 };

// One of the six preprocessing combinations under ablation.
struct PrepRecipe {
  RecipeName name = RecipeName::kGray;
  bool dilate_erode = false;
  int contrast_percent = 0;  // one of {0, 20, 60}
};

const std::array<PrepRecipe, 6>& all_recipes();
PrepRecipe recipe_from_name(const std::string& name);
std::string recipe_name(RecipeName name);

// ITU-R BT.601 luminance, rounded and clamped per channel sum.
GrayImage to_grayscale(const RgbImage& image);

// Sliding-window max (dilate) / min (erode) with a square kernel and
// replicate-edge padding. kernel must be odd and >= 1.
GrayImage morph(const GrayImage& image, MorphOp op, int kernel, int iterations);

// Linear stretch about mid-gray 128: p' = clamp(round(128 + (1+pct/100)(p-128))).
GrayImage adjust_contrast(const GrayImage& image, int percent);

// dilate(3) x1 then erode(3) x1 if the recipe asks, then contrast.
GrayImage apply_recipe(const GrayImage& image, const PrepRecipe& recipe);

}  // namespace scandoc::img
