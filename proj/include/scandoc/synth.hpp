#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scandoc/ocr.hpp"
#include "scandoc/segmenter.hpp"

namespace scandoc::synth {

struct Template {
  std::string text;  // sentence with {ahi} and {sao2} placeholders
  double weight = 1.0;
};

struct SynthConfig {
  int n_reports = 100;
  int pages_min = 1;
  int pages_max = 4;
  std::vector<Template> templates;  // empty -> built-in default set
  int distractor_density = 8;      // numeric distractor sentences per page
  double noise_rate = 0.0;         // per-character substitution probability
  std::uint64_t seed = 0;

  void validate() const;
};

const std::vector<Template>& default_templates();

// Deterministic per (seed, report_id). Gold values appear verbatim as tokens
// on every page (pre-noise); distractors occasionally collide with gold on
// purpose to exercise the label-collision path.
std::pair<std::vector<ocr::PageWords>, seg::GoldRecord> generate_report(
    const SynthConfig& config, const std::string& report_id);

// Character-level OCR confusion noise ({l,S,5,O,0,i} table). Token count and
// geometry are never altered.
ocr::PageWords inject_ocr_noise(const ocr::PageWords& words, double rate, std::uint64_t seed);

// Writes pages/<report>_p<n>.tsv plus manifest.jsonl; returns the manifest path.
std::string generate_corpus(const SynthConfig& config, const std::string& out_dir);

}  // namespace scandoc::synth
