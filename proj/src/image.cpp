#include "scandoc/image.hpp"

#include <algorithm>
#include <cmath>

#include "scandoc/errors.hpp"

namespace scandoc::img {

const std::array<PrepRecipe, 6>& all_recipes() {
  static const std::array<PrepRecipe, 6> table = {{
      {RecipeName::kGray, false, 0},
      {RecipeName::kGrayDe, true, 0},
      {RecipeName::kGrayC20, false, 20},
      {RecipeName::kGrayC60, false, 60},
      {RecipeName::kGrayDeC20, true, 20},
      {RecipeName::kGrayDeC60, true, 60},
  }};
  return table;
}

std::string recipe_name(RecipeName name) {
  switch (name) {
    case RecipeName::kGray: return "gray";
    case RecipeName::kGrayDe: return "gray_de";
    case RecipeName::kGrayC20: return "gray_c20";
    case RecipeName::kGrayC60: return "gray_c60";
    case RecipeName::kGrayDeC20: return "gray_de_c20";
    case RecipeName::kGrayDeC60: return "gray_de_c60";
  }
  return "gray";
}

PrepRecipe recipe_from_name(const std::string& name) {
  for (const auto& r : all_recipes()) {
    if (recipe_name(r.name) == name) return r;
  }
  throw InvalidInputError("unknown preprocessing recipe: " + name);
}

GrayImage to_grayscale(const RgbImage& image) {
  if (image.width <= 0 || image.height <= 0) {
    throw InvalidInputError("to_grayscale: zero-dimension image");
  }
  GrayImage out(image.width, image.height);
  const std::size_t n = out.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t r = image.data[3 * i];
    const std::uint8_t g = image.data[3 * i + 1];
    const std::uint8_t b = image.data[3 * i + 2];
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    out.data[i] = static_cast<std::uint8_t>(
        std::clamp<long>(std::lround(y), 0, 255));
  }
  return out;
}

namespace {

GrayImage morph_once(const GrayImage& src, MorphOp op, int kernel) {
  GrayImage out(src.width, src.height);
  const int r = kernel / 2;
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      std::uint8_t acc = src.at(x, y);
      for (int dy = -r; dy <= r; ++dy) {
        // Replicate-edge padding: clamp window coordinates into the image.
        const int yy = std::clamp(y + dy, 0, src.height - 1);
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = std::clamp(x + dx, 0, src.width - 1);
          const std::uint8_t v = src.at(xx, yy);
          acc = (op == MorphOp::kDilate) ? std::max(acc, v) : std::min(acc, v);
        }
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

}  // namespace

GrayImage morph(const GrayImage& image, MorphOp op, int kernel, int iterations) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw InvalidInputError("morph: kernel side must be odd and >= 1");
  }
  if (iterations < 0) throw InvalidInputError("morph: iterations must be >= 0");
  GrayImage out = image;
  for (int i = 0; i < iterations; ++i) out = morph_once(out, op, kernel);
  return out;
}

GrayImage adjust_contrast(const GrayImage& image, int percent) {
  if (percent < 0) throw InvalidInputError("adjust_contrast: percent must be >= 0");
  const double gain = 1.0 + percent / 100.0;
  GrayImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const double v = 128.0 + gain * (image.data[i] - 128.0);
    out.data[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
  }
  return out;
}

GrayImage apply_recipe(const GrayImage& image, const PrepRecipe& recipe) {
  GrayImage out = image;
  if (recipe.dilate_erode) {
    out = morph(out, MorphOp::kDilate, 3, 1);
    out = morph(out, MorphOp::kErode, 3, 1);
  }
  if (recipe.contrast_percent > 0) {
    out = adjust_contrast(out, recipe.contrast_percent);
  }
  return out;
}

}  // namespace scandoc::img
