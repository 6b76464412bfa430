#include "scandoc/deid.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "scandoc/errors.hpp"
#include "scandoc/text.hpp"

namespace scandoc::deid {

namespace {

std::vector<std::string> split_multi(const std::string& field) {
  std::vector<std::string> out;
  for (auto& v : split_char(field, ';')) {
    if (!v.empty()) out.push_back(std::move(v));
  }
  return out;
}

bool digits_between(const std::string& s, std::size_t begin, std::size_t end,
                    std::size_t min_len, std::size_t max_len) {
  const std::size_t len = end - begin;
  if (len < min_len || len > max_len) return false;
  for (std::size_t i = begin; i < end; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

}  // namespace

std::map<std::string, DeidLookup> load_lookup_csv(const std::string& csv_text) {
  std::map<std::string, DeidLookup> out;
  std::istringstream stream(csv_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("report_id,", 0) == 0) continue;  // optional header
    const auto fields = csv_split(line);
    if (fields.size() != 3) {
      throw ParseError("de-id lookup line " + std::to_string(line_no) +
                       ": expected 3 columns, found " + std::to_string(fields.size()));
    }
    DeidLookup entry;
    entry.report_id = fields[0];
    entry.patient_name_tokens = split_multi(fields[1]);
    entry.mrn_values = split_multi(fields[2]);
    if (out.count(entry.report_id)) {
      throw ParseError("de-id lookup: duplicate report_id '" + entry.report_id + "'");
    }
    out.emplace(entry.report_id, std::move(entry));
  }
  return out;
}

bool is_date_token(const std::string& token) {
  const auto first = token.find('/');
  if (first == std::string::npos) return false;
  const auto second = token.find('/', first + 1);
  if (second == std::string::npos) return false;
  if (token.find('/', second + 1) != std::string::npos) return false;
  const std::size_t year_len = token.size() - second - 1;
  return digits_between(token, 0, first, 1, 2) &&
         digits_between(token, first + 1, second, 1, 2) &&
         (year_len == 2 || year_len == 4) &&
         digits_between(token, second + 1, token.size(), year_len, year_len);
}

ocr::PageWords deidentify(const ocr::PageWords& words, const DeidLookup* lookup,
                          MissingLookupPolicy policy) {
  if (!lookup && policy == MissingLookupPolicy::kStrict) {
    throw InvalidInputError("deidentify: no lookup entry for this report (strict policy)");
  }
  std::vector<std::string> names;
  std::vector<std::string> mrns;
  if (lookup) {
    for (const auto& n : lookup->patient_name_tokens) names.push_back(to_lower(n));
    for (const auto& m : lookup->mrn_values) mrns.push_back(to_lower(m));
  }

  ocr::PageWords out = words;
  for (auto& w : out.words) {
    // Whole-token, case-insensitive, trailing punctuation stripped for names.
    const std::string folded = to_lower(w.text);
    const std::string folded_stripped = to_lower(strip_trailing_punct(w.text));
    if (!folded_stripped.empty() &&
        std::find(names.begin(), names.end(), folded_stripped) != names.end()) {
      w.text = kNamePlaceholder;
    } else if (std::find(mrns.begin(), mrns.end(), folded) != mrns.end()) {
      w.text = kMrnPlaceholder;
    } else if (is_date_token(w.text)) {
      w.text = kDatePlaceholder;
    }
  }
  return out;
}

}  // namespace scandoc::deid
