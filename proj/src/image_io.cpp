#include "scandoc/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "scandoc/errors.hpp"
#include "scandoc/text.hpp"

namespace scandoc::img {

namespace {

std::string lower_ext(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  return to_lower(path.substr(dot + 1));
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

AnyImage load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw EnvironmentError("cannot open image: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw EnvironmentError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw EnvironmentError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("malformed PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const png_byte channels = png_get_channels(png, info);

  std::vector<std::uint8_t> rowbuf(png_get_rowbytes(png, info));
  AnyImage result;
  if (channels == 1) {
    GrayImage gray(width, height);
    for (int y = 0; y < height; ++y) {
      png_read_row(png, rowbuf.data(), nullptr);
      std::memcpy(&gray.data[static_cast<std::size_t>(y) * width], rowbuf.data(), width);
    }
    result = std::move(gray);
  } else if (channels == 3) {
    RgbImage rgb(width, height);
    for (int y = 0; y < height; ++y) {
      png_read_row(png, rowbuf.data(), nullptr);
      std::memcpy(&rgb.data[static_cast<std::size_t>(y) * width * 3], rowbuf.data(),
                  static_cast<std::size_t>(width) * 3);
    }
    result = std::move(rgb);
  } else {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("unsupported PNG channel count: " + path);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return result;
}

void save_png_impl(const std::string& path, int width, int height, int channels,
                   const std::uint8_t* data) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw EnvironmentError("cannot write image: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw EnvironmentError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw EnvironmentError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw EnvironmentError("PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

int read_pnm_token(std::istream& in) {
  // Skips whitespace and '#' comments per the netpbm grammar.
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return value;
}

AnyImage load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EnvironmentError("cannot open image: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P6") throw ParseError("unsupported PNM magic in " + path);
  const int width = read_pnm_token(in);
  const int height = read_pnm_token(in);
  const int maxval = read_pnm_token(in);
  if (width <= 0 || height <= 0 || maxval != 255) {
    throw ParseError("unsupported PNM header in " + path);
  }
  in.get();  // single whitespace after maxval
  const int channels = magic == "P5" ? 1 : 3;
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ParseError("truncated PNM payload in " + path);
  }
  if (channels == 1) {
    GrayImage gray(width, height);
    gray.data = std::move(bytes);
    return gray;
  }
  RgbImage rgb(width, height);
  rgb.data = std::move(bytes);
  return rgb;
}

void save_pnm(const std::string& path, int width, int height, int channels,
              const std::uint8_t* data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EnvironmentError("cannot write image: " + path);
  out << (channels == 1 ? "P5" : "P6") << "\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(static_cast<std::size_t>(width) * height * channels));
}

}  // namespace

AnyImage load_image(const std::string& path) {
  const std::string ext = lower_ext(path);
  if (ext == "png") return load_png(path);
  if (ext == "pgm" || ext == "ppm" || ext == "pnm") return load_pnm(path);
  throw InvalidInputError("unsupported image extension: " + path);
}

void save_gray(const std::string& path, const GrayImage& image) {
  const std::string ext = lower_ext(path);
  if (ext == "png") save_png_impl(path, image.width, image.height, 1, image.data.data());
  else if (ext == "pgm") save_pnm(path, image.width, image.height, 1, image.data.data());
  else throw InvalidInputError("unsupported gray image extension: " + path);
}

void save_rgb(const std::string& path, const RgbImage& image) {
  const std::string ext = lower_ext(path);
  if (ext == "png") save_png_impl(path, image.width, image.height, 3, image.data.data());
  else if (ext == "ppm") save_pnm(path, image.width, image.height, 3, image.data.data());
  else throw InvalidInputError("unsupported RGB image extension: " + path);
}

GrayImage load_gray(const std::string& path) {
  AnyImage any = load_image(path);
  if (auto* gray = std::get_if<GrayImage>(&any)) return std::move(*gray);
  return to_grayscale(std::get<RgbImage>(any));
}

}  // namespace scandoc::img
