#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scandoc/ocr.hpp"

namespace scandoc::seg {

enum class Label { kAhi = 0, kSao2 = 1, kOther = 2 };

std::string label_name(Label label);
Label label_from_name(const std::string& name);

// One numeric candidate with its context window (one Table-style row).
struct Instance {
  std::string report_id;
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
  int page = 1;
  ocr::OrderKey order_key;
  double numeric_value = 0.0;
  std::string segment;  // <= 21 space-joined tokens containing the candidate
  Label label = Label::kOther;
};

struct GoldRecord {
  std::string report_id;
  std::vector<double> ahi_values;
  std::vector<double> sao2_values;
};

// A candidate the numeric parser rejected, kept for the log.
struct DroppedCandidate {
  std::string report_id;
  int page = 1;
  std::size_t index = 0;
  std::string token;
};

// Indices of tokens fully matching [0-9.,%]+ that contain at least one digit.
std::vector<std::size_t> find_candidates(const ocr::PageWords& words);

// Strips '%' and ',' and leading/trailing '.', then parses. Multiple interior
// dots yield nullopt (caller drops and logs the candidate).
std::optional<double> parse_numeric(const std::string& token);

// Up to `radius` words each side of the candidate, same page only.
std::string extract_segment(const ocr::PageWords& words, std::size_t idx, int radius = 10);

struct SegmentResult {
  std::vector<Instance> instances;
  std::vector<DroppedCandidate> dropped;
};

// All candidates of a report's pages, in reading order, labels defaulting to Other.
SegmentResult segment_report(const std::string& report_id,
                             const std::vector<ocr::PageWords>& pages, int radius = 10);

struct LabelCollision {
  std::string report_id;
  double value = 0.0;
};

// AHI wins a double match; collisions are reported back to the caller.
std::vector<LabelCollision> assign_labels(std::vector<Instance>& instances,
                                          const GoldRecord& gold, double epsilon = 1e-6);

inline constexpr const char* kInstanceCsvHeader =
    "report_id,left,top,width,height,page,numeric_value,segment,label";

std::string instances_to_csv(const std::vector<Instance>& instances);
std::vector<Instance> instances_from_csv(const std::string& csv_text);

}  // namespace scandoc::seg
