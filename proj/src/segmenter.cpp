#include "scandoc/segmenter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "scandoc/errors.hpp"
#include "scandoc/text.hpp"

namespace scandoc::seg {

std::string label_name(Label label) {
  switch (label) {
    case Label::kAhi: return "AHI";
    case Label::kSao2: return "SaO2";
    case Label::kOther: return "Other";
  }
  return "Other";
}

Label label_from_name(const std::string& name) {
  if (name == "AHI") return Label::kAhi;
  if (name == "SaO2") return Label::kSao2;
  if (name == "Other") return Label::kOther;
  throw InvalidInputError("unknown label: " + name);
}

namespace {

bool is_candidate_token(const std::string& token) {
  if (token.empty()) return false;
  bool has_digit = false;
  for (unsigned char c : token) {
    if (std::isdigit(c)) has_digit = true;
    else if (c != '.' && c != ',' && c != '%') return false;
  }
  return has_digit;
}

}  // namespace

std::vector<std::size_t> find_candidates(const ocr::PageWords& words) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < words.words.size(); ++i) {
    if (is_candidate_token(words.words[i].text)) out.push_back(i);
  }
  return out;
}

std::optional<double> parse_numeric(const std::string& token) {
  std::string cleaned;
  cleaned.reserve(token.size());
  for (char c : token) {
    if (c != '%' && c != ',') cleaned += c;
  }
  std::size_t begin = 0;
  std::size_t end = cleaned.size();
  while (begin < end && cleaned[begin] == '.') ++begin;
  while (end > begin && cleaned[end - 1] == '.') --end;
  cleaned = cleaned.substr(begin, end - begin);
  if (cleaned.empty()) return std::nullopt;
  if (std::count(cleaned.begin(), cleaned.end(), '.') > 1) return std::nullopt;

  char* parse_end = nullptr;
  const double value = std::strtod(cleaned.c_str(), &parse_end);
  if (parse_end != cleaned.c_str() + cleaned.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::string extract_segment(const ocr::PageWords& words, std::size_t idx, int radius) {
  if (idx >= words.words.size()) {
    throw InvalidInputError("extract_segment: candidate index out of range");
  }
  const std::size_t lo = idx >= static_cast<std::size_t>(radius) ? idx - radius : 0;
  const std::size_t hi = std::min(words.words.size() - 1, idx + static_cast<std::size_t>(radius));
  std::string out;
  for (std::size_t i = lo; i <= hi; ++i) {
    if (i > lo) out += ' ';
    out += words.words[i].text;
  }
  return out;
}

SegmentResult segment_report(const std::string& report_id,
                             const std::vector<ocr::PageWords>& pages, int radius) {
  SegmentResult result;
  for (const auto& page : pages) {
    for (std::size_t idx : find_candidates(page)) {
      const auto& w = page.words[idx];
      const auto value = parse_numeric(w.text);
      if (!value) {
        result.dropped.push_back({report_id, page.page, idx, w.text});
        continue;
      }
      Instance inst;
      inst.report_id = report_id;
      inst.left = w.left;
      inst.top = w.top;
      inst.width = w.width;
      inst.height = w.height;
      inst.page = page.page;
      inst.order_key = w.order_key;
      inst.numeric_value = *value;
      inst.segment = extract_segment(page, idx, radius);
      result.instances.push_back(std::move(inst));
    }
  }
  return result;
}

std::vector<LabelCollision> assign_labels(std::vector<Instance>& instances,
                                          const GoldRecord& gold, double epsilon) {
  const auto matches = [epsilon](double value, const std::vector<double>& golds) {
    return std::any_of(golds.begin(), golds.end(), [&](double g) {
      return std::fabs(value - g) <= epsilon;
    });
  };
  std::vector<LabelCollision> collisions;
  for (auto& inst : instances) {
    const bool is_ahi = matches(inst.numeric_value, gold.ahi_values);
    const bool is_sao2 = matches(inst.numeric_value, gold.sao2_values);
    if (is_ahi && is_sao2) {
      collisions.push_back({inst.report_id, inst.numeric_value});
    }
    inst.label = is_ahi ? Label::kAhi : (is_sao2 ? Label::kSao2 : Label::kOther);
  }
  return collisions;
}

std::string instances_to_csv(const std::vector<Instance>& instances) {
  std::string out = kInstanceCsvHeader;
  out += '\n';
  for (const auto& inst : instances) {
    out += csv_join({inst.report_id, std::to_string(inst.left), std::to_string(inst.top),
                     std::to_string(inst.width), std::to_string(inst.height),
                     std::to_string(inst.page), format_numeric_value(inst.numeric_value),
                     inst.segment, label_name(inst.label)});
    out += '\n';
  }
  return out;
}

std::vector<Instance> instances_from_csv(const std::string& csv_text) {
  std::istringstream stream(csv_text);
  std::string line;
  if (!std::getline(stream, line)) throw ParseError("instance CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kInstanceCsvHeader) throw ParseError("instance CSV: unexpected header");
  std::vector<Instance> out;
  std::size_t line_no = 1;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = csv_split(line);
    if (fields.size() != 9) {
      throw ParseError("instance CSV line " + std::to_string(line_no) + ": expected 9 fields");
    }
    Instance inst;
    inst.report_id = fields[0];
    inst.left = std::stoi(fields[1]);
    inst.top = std::stoi(fields[2]);
    inst.width = std::stoi(fields[3]);
    inst.height = std::stoi(fields[4]);
    inst.page = std::stoi(fields[5]);
    inst.numeric_value = std::stod(fields[6]);
    inst.segment = fields[7];
    inst.label = label_from_name(fields[8]);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace scandoc::seg
