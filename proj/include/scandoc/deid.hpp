#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scandoc/ocr.hpp"

namespace scandoc::deid {

struct DeidLookup {
  std::string report_id;
  std::vector<std::string> patient_name_tokens;
  std::vector<std::string> mrn_values;
};

// Keyed by report_id. CSV format: report_id,name_tokens,mrn_values with
// ';'-separated multi-values.
std::map<std::string, DeidLookup> load_lookup_csv(const std::string& csv_text);

enum class MissingLookupPolicy { kStrict, kLenient };

inline constexpr const char* kNamePlaceholder = "[PATNAME]";
inline constexpr const char* kMrnPlaceholder = "[MRN]";
inline constexpr const char* kDatePlaceholder = "[DATE]";

// True for full-token dates d{1,2}/d{1,2}/(yy|yyyy).
bool is_date_token(const std::string& token);

// Replaces name/MRN/date tokens with placeholders. Geometry, order and token
// count are untouched. With no lookup: strict policy throws, lenient policy
// scrubs dates only.
ocr::PageWords deidentify(const ocr::PageWords& words, const DeidLookup* lookup,
                          MissingLookupPolicy policy = MissingLookupPolicy::kStrict);

}  // namespace scandoc::deid
