#include "scandoc/ocr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "scandoc/errors.hpp"
#include "scandoc/hash.hpp"
#include "scandoc/image_io.hpp"
#include "scandoc/rng.hpp"
#include "scandoc/text.hpp"

namespace scandoc::ocr {

namespace {

const std::array<const char*, 12> kColumns = {
    "level",  "page_num", "block_num", "par_num", "line_num", "word_num",
    "left",   "top",      "width",     "height",  "conf",     "text"};

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

int parse_int_field(const std::string& field, const char* column, std::size_t line_no) {
  int value = 0;
  const auto* begin = field.data();
  const auto* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("word table line " + std::to_string(line_no) + ": column '" +
                     column + "' is not an integer: '" + field + "'");
  }
  return value;
}

}  // namespace

std::vector<PageWords> parse_word_table(const std::string& tsv_text) {
  std::istringstream stream(tsv_text);
  std::string line;
  if (!std::getline(stream, line)) throw ParseError("word table: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const auto header = split_char(line, '\t');
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i >= header.size() || header[i] != kColumns[i]) {
      throw ParseError(std::string("word table header: expected column '") + kColumns[i] +
                       "' at position " + std::to_string(i + 1) +
                       (i < header.size() ? ", found '" + header[i] + "'" : ", found end of line"));
    }
  }
  if (header.size() != kColumns.size()) {
    throw ParseError("word table header: expected 12 columns, found " +
                     std::to_string(header.size()));
  }

  std::map<int, PageWords> by_page;
  std::size_t line_no = 1;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_char(line, '\t');
    if (fields.size() != kColumns.size()) {
      throw ParseError("word table line " + std::to_string(line_no) + ": expected 12 fields, found " +
                       std::to_string(fields.size()));
    }
    const int level = parse_int_field(fields[0], "level", line_no);
    if (level != 5) continue;  // only word rows carry tokens
    WordBox box;
    box.page = parse_int_field(fields[1], "page_num", line_no);
    box.order_key.block = parse_int_field(fields[2], "block_num", line_no);
    box.order_key.par = parse_int_field(fields[3], "par_num", line_no);
    box.order_key.line = parse_int_field(fields[4], "line_num", line_no);
    box.order_key.word = parse_int_field(fields[5], "word_num", line_no);
    box.left = parse_int_field(fields[6], "left", line_no);
    box.top = parse_int_field(fields[7], "top", line_no);
    box.width = parse_int_field(fields[8], "width", line_no);
    box.height = parse_int_field(fields[9], "height", line_no);
    try {
      box.confidence = std::stod(fields[10]);
    } catch (const std::exception&) {
      throw ParseError("word table line " + std::to_string(line_no) +
                       ": column 'conf' is not numeric: '" + fields[10] + "'");
    }
    box.text = fields[11];
    if (is_blank(box.text)) continue;  // engines emit these for image fragments
    auto& page = by_page[box.page];
    page.page = box.page;
    page.words.push_back(std::move(box));
  }

  std::vector<PageWords> pages;
  pages.reserve(by_page.size());
  for (auto& [page_no, page] : by_page) {
    std::stable_sort(page.words.begin(), page.words.end(),
                     [](const WordBox& a, const WordBox& b) { return a.order_key < b.order_key; });
    pages.push_back(std::move(page));
  }
  return pages;
}

std::string serialize_word_table(const std::vector<PageWords>& pages) {
  std::string out = kWordTableHeader;
  out += '\n';
  for (const auto& page : pages) {
    for (const auto& w : page.words) {
      out += "5\t";
      out += std::to_string(w.page) + '\t';
      out += std::to_string(w.order_key.block) + '\t';
      out += std::to_string(w.order_key.par) + '\t';
      out += std::to_string(w.order_key.line) + '\t';
      out += std::to_string(w.order_key.word) + '\t';
      out += std::to_string(w.left) + '\t';
      out += std::to_string(w.top) + '\t';
      out += std::to_string(w.width) + '\t';
      out += std::to_string(w.height) + '\t';
      out += format_double(w.confidence) + '\t';
      out += w.text;
      out += '\n';
    }
  }
  return out;
}

img::GrayImage render_overlay(const img::GrayImage& image, const PageWords& words) {
  img::GrayImage out = image;
  constexpr std::uint8_t kInk = 0;
  for (const auto& w : words.words) {
    const int x0 = std::clamp(w.left, 0, image.width - 1);
    const int y0 = std::clamp(w.top, 0, image.height - 1);
    const int x1 = std::clamp(w.left + w.width - 1, 0, image.width - 1);
    const int y1 = std::clamp(w.top + w.height - 1, 0, image.height - 1);
    if (x1 < x0 || y1 < y0) continue;
    for (int x = x0; x <= x1; ++x) {
      out.at(x, y0) = kInk;
      out.at(x, y1) = kInk;
    }
    for (int y = y0; y <= y1; ++y) {
      out.at(x0, y) = kInk;
      out.at(x1, y) = kInk;
    }
  }
  return out;
}

SubprocessEngine::SubprocessEngine(std::string command, std::string workdir)
    : command_(std::move(command)), workdir_(std::move(workdir)) {
  if (workdir_.empty()) {
    workdir_ = std::filesystem::temp_directory_path().string();
  }
}

SubprocessEngine SubprocessEngine::from_env() {
  const char* cmd = std::getenv("SCANDOC_OCR_CMD");
  if (!cmd || !*cmd) {
    throw EnvironmentError("SCANDOC_OCR_CMD is not set and no engine command was given");
  }
  return SubprocessEngine(cmd);
}

PageWords SubprocessEngine::recognize(const img::GrayImage& image, int page) {
  namespace fs = std::filesystem;
  const std::string tag = hex64(fnv1a(image.data.data(), image.data.size()));
  const fs::path base = fs::path(workdir_) / ("scandoc_ocr_" + tag);
  const fs::path image_path = base.string() + ".png";
  const fs::path tsv_path = base.string() + ".tsv";
  const fs::path err_path = base.string() + ".stderr";
  img::save_gray(image_path.string(), image);

  const std::string cmdline = command_ + " \"" + image_path.string() + "\" \"" +
                              base.string() + "\" tsv 2>\"" + err_path.string() + "\"";
  const int rc = std::system(cmdline.c_str());
  std::string err_text;
  if (fs::exists(err_path)) err_text = read_file(err_path.string());
  if (rc != 0) {
    const int exit_code = rc >= 256 ? rc / 256 : rc;
    if (exit_code == 127) {
      throw EnvironmentError("OCR engine not found: " + command_);
    }
    throw EngineError("OCR engine exited with status " + std::to_string(exit_code), err_text);
  }
  if (!fs::exists(tsv_path)) {
    throw EngineError("OCR engine produced no word table at " + tsv_path.string(), err_text);
  }
  auto pages = parse_word_table(read_file(tsv_path.string()));
  fs::remove(image_path);
  fs::remove(tsv_path);
  fs::remove(err_path);

  PageWords result;
  result.page = page;
  if (!pages.empty()) {
    result.words = std::move(pages.front().words);
    for (auto& w : result.words) w.page = page;
  }
  return result;
}

void MockEngine::script(const img::GrayImage& image, std::vector<WordBox> words) {
  scripted_[fnv1a(image.data.data(), image.data.size())] = std::move(words);
}

PageWords MockEngine::recognize(const img::GrayImage& image, int page) {
  const std::uint64_t image_hash = fnv1a(image.data.data(), image.data.size());
  PageWords result;
  result.page = page;
  if (auto it = scripted_.find(image_hash); it != scripted_.end()) {
    result.words = it->second;
    for (auto& w : result.words) w.page = page;
    return result;
  }
  const bool blank = std::all_of(image.data.begin(), image.data.end(),
                                 [](std::uint8_t v) { return v >= 250; });
  if (blank) return result;

  // Pseudo words, a pure function of (image hash, seed).
  Rng rng(derive_seed(seed_, hex64(image_hash)));
  const int n = 1 + static_cast<int>(rng.below(8));
  for (int i = 0; i < n; ++i) {
    WordBox w;
    w.text = "w" + std::to_string(rng.below(1000));
    w.width = 20 + static_cast<int>(rng.below(60));
    w.height = 10 + static_cast<int>(rng.below(20));
    w.left = static_cast<int>(rng.below(std::max(1, image.width - w.width)));
    w.top = static_cast<int>(rng.below(std::max(1, image.height - w.height)));
    w.page = page;
    w.order_key = {1, 1, 1 + i / 8, 1 + i % 8};
    w.confidence = 50.0 + static_cast<double>(rng.below(50));
    result.words.push_back(std::move(w));
  }
  std::sort(result.words.begin(), result.words.end(),
            [](const WordBox& a, const WordBox& b) { return a.order_key < b.order_key; });
  return result;
}

PageWords run_ocr(const img::GrayImage& image, OcrEngine& engine, int page) {
  return engine.recognize(image, page);
}

}  // namespace scandoc::ocr
