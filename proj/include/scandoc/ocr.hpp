#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "scandoc/image.hpp"

namespace scandoc::ocr {

// Reading-order key within a page: (block, paragraph, line, word).
struct OrderKey {
  int block = 0;
  int par = 0;
  int line = 0;
  int word = 0;
  auto operator<=>(const OrderKey&) const = default;
};

// One OCR-recognized token with its pixel bounding box.
struct WordBox {
  std::string text;
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
  int page = 1;  // 1-based
  OrderKey order_key;
  double confidence = -1.0;  // percent, engine convention allows -1

  bool operator==(const WordBox&) const = default;
};

struct PageWords {
  int page = 1;
  std::vector<WordBox> words;  // sorted ascending by order_key
  std::string source_image;    // optional

  bool operator==(const PageWords&) const = default;
};

inline constexpr const char* kWordTableHeader =
    "level\tpage_num\tblock_num\tpar_num\tline_num\tword_num\tleft\ttop\twidth\theight\tconf\ttext";

// Parses the engine's 12-column word table. Only level-5 (word) rows are kept;
// empty/whitespace-only texts are dropped. Throws ParseError on a bad header
// (naming the offending column) or a non-integer geometry field (with line no).
std::vector<PageWords> parse_word_table(const std::string& tsv_text);

std::string serialize_word_table(const std::vector<PageWords>& pages);

// Copy of the image with a 1-pixel rectangle on each word box, clipped to bounds.
img::GrayImage render_overlay(const img::GrayImage& image, const PageWords& words);

// Abstract OCR backend.
class OcrEngine {
 public:
  virtual ~OcrEngine() = default;
  virtual PageWords recognize(const img::GrayImage& image, int page) = 0;
};

// Runs `<command> <image-path> <out-base> tsv` and parses `<out-base>.tsv`.
// The command comes from the constructor or the SCANDOC_OCR_CMD env var.
class SubprocessEngine : public OcrEngine {
 public:
  explicit SubprocessEngine(std::string command, std::string workdir = "");
  // Uses SCANDOC_OCR_CMD; throws EnvironmentError if unset.
  static SubprocessEngine from_env();
  PageWords recognize(const img::GrayImage& image, int page) override;

 private:
  std::string command_;
  std::string workdir_;
};

// Deterministic backend for tests and offline runs. Pages can be scripted per
// image content hash; unscripted images yield a pseudo word list derived from
// (image hash, seed), and blank pages yield no words.
class MockEngine : public OcrEngine {
 public:
  explicit MockEngine(std::uint64_t seed = 0) : seed_(seed) {}
  void script(const img::GrayImage& image, std::vector<WordBox> words);
  PageWords recognize(const img::GrayImage& image, int page) override;

 private:
  std::uint64_t seed_;
  std::map<std::uint64_t, std::vector<WordBox>> scripted_;
};

PageWords run_ocr(const img::GrayImage& image, OcrEngine& engine, int page = 1);

}  // namespace scandoc::ocr
