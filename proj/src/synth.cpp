#include "scandoc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "scandoc/errors.hpp"
#include "scandoc/rng.hpp"
#include "scandoc/text.hpp"

namespace scandoc::synth {

namespace {

const std::vector<std::string>& filler_sentences() {
  static const std::vector<std::string> fillers = {
      "The patient slept in supine and lateral positions during the study .",
      "Sleep architecture showed fragmented and reduced REM sleep .",
      "CPAP titration is recommended for further clinical management .",
      "The study was performed overnight in the accredited sleep laboratory .",
      "EEG EMG and EKG signals were recorded continuously throughout the night .",
      "Findings were reviewed and interpreted by the attending sleep physician .",
      "Snoring was noted intermittently during the recording period .",
  };
  return fillers;
}

// Distractor sentences each carry one numeric token at the {v} slot.
struct DistractorKind {
  const char* text;
  double lo;
  double hi;
  bool integer;
};

const std::vector<DistractorKind>& distractor_kinds() {
  static const std::vector<DistractorKind> kinds = {
      {"Sleep efficiency was {v} % for the night .", 40, 99, true},
      {"Total sleep time was {v} minutes .", 180, 540, true},
      {"There were {v} hypopneas recorded .", 0, 400, true},
      {"The arousal index was {v} events per hour .", 0, 100, false},
      {"An apnea index of {v} was noted .", 0, 120, false},
      {"Lowest heart rate was {v} bpm .", 35, 90, true},
      {"{v} central apneas were observed .", 0, 50, true},
      {"Body mass index was {v} at intake .", 18, 60, false},
  };
  return kinds;
}

std::string format_one_decimal(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string format_integer(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.0f", v);
  return buf;
}

std::string replace_all(std::string text, const std::string& needle, const std::string& value) {
  std::size_t at = 0;
  while ((at = text.find(needle, at)) != std::string::npos) {
    text.replace(at, needle.size(), value);
    at += value.size();
  }
  return text;
}

// Lays sentences onto a synthetic pixel grid, one visual line per sentence
// with wrapping, producing strictly ordered word boxes.
ocr::PageWords layout_page(const std::vector<std::string>& sentences, int page, Rng& rng) {
  ocr::PageWords out;
  out.page = page;
  constexpr int kPageWidth = 1700;
  constexpr int kLeftMargin = 120;
  int y = 140;
  int line_no = 1;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    int x = kLeftMargin;
    int word_no = 1;
    for (const auto& token : split_ws(sentences[s])) {
      const int w = 11 * static_cast<int>(token.size()) + 6 + static_cast<int>(rng.below(8));
      const int h = 22 + static_cast<int>(rng.below(8));
      if (x + w > kPageWidth - kLeftMargin) {
        x = kLeftMargin;
        y += 44;
        ++line_no;
        word_no = 1;
      }
      ocr::WordBox box;
      box.text = token;
      box.left = x;
      box.top = y + static_cast<int>(rng.below(4));
      box.width = w;
      box.height = h;
      box.page = page;
      box.order_key = {1, static_cast<int>(s) + 1, line_no, word_no};
      box.confidence = 70.0 + static_cast<double>(rng.below(30));
      out.words.push_back(std::move(box));
      x += w + 10;
      ++word_no;
    }
    y += 44;
    ++line_no;
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_reports < 1) throw InvalidInputError("synth config: n_reports must be >= 1");
  if (noise_rate < 0.0 || noise_rate >= 1.0) {
    throw InvalidInputError("synth config: noise_rate must be in [0,1)");
  }
  if (pages_min < 1 || pages_max < pages_min) {
    throw InvalidInputError("synth config: bad page range");
  }
  if (distractor_density < 0) throw InvalidInputError("synth config: negative distractor density");
}

const std::vector<Template>& default_templates() {
  static const std::vector<Template> templates = {
      {"The total APNEA/HYPOPNEA INDEX ( AHI ) was {ahi} and the lowest oxygen "
       "saturation SaO2 was {sao2} % .",
       1.0},
      {"Overall AHI was {ahi} events per hour with a minimum SaO2 of {sao2} % "
       "during sleep .",
       1.0},
      {"The AHI for this study was {ahi} while the oxygen saturation nadir "
       "reached {sao2} % .",
       1.0},
  };
  return templates;
}

std::pair<std::vector<ocr::PageWords>, seg::GoldRecord> generate_report(
    const SynthConfig& config, const std::string& report_id) {
  config.validate();
  Rng rng(derive_seed(config.seed, "report:" + report_id));

  const std::string ahi_token = format_one_decimal(0.5 + rng.uniform() * 119.5);
  const std::string sao2_token = rng.bernoulli(0.5)
                                     ? format_integer(60 + static_cast<double>(rng.below(41)))
                                     : format_one_decimal(60.0 + rng.uniform() * 40.0);

  seg::GoldRecord gold;
  gold.report_id = report_id;
  gold.ahi_values = {*seg::parse_numeric(ahi_token)};
  gold.sao2_values = {*seg::parse_numeric(sao2_token)};

  const auto& templates = config.templates.empty() ? default_templates() : config.templates;
  double total_weight = 0.0;
  for (const auto& t : templates) total_weight += t.weight;
  const double draw = rng.uniform() * total_weight;
  std::size_t chosen = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    acc += templates[i].weight;
    if (draw < acc) {
      chosen = i;
      break;
    }
  }
  std::string gold_sentence = replace_all(templates[chosen].text, "{ahi}", ahi_token);
  gold_sentence = replace_all(gold_sentence, "{sao2}", sao2_token);

  const int n_pages =
      config.pages_min + static_cast<int>(rng.below(
                             static_cast<std::uint64_t>(config.pages_max - config.pages_min + 1)));

  std::vector<ocr::PageWords> pages;
  for (int p = 1; p <= n_pages; ++p) {
    std::vector<std::string> sentences;
    const auto& fillers = filler_sentences();
    const int n_fillers = 2 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n_fillers; ++i) {
      sentences.push_back(fillers[rng.below(fillers.size())]);
    }
    for (int i = 0; i < config.distractor_density; ++i) {
      const auto& kind = distractor_kinds()[rng.below(distractor_kinds().size())];
      std::string value;
      // A small share of distractors collide with the gold values on purpose.
      if (rng.bernoulli(0.03)) {
        value = rng.bernoulli(0.5) ? ahi_token : sao2_token;
      } else if (kind.integer) {
        value = format_integer(kind.lo + static_cast<double>(rng.below(
                                             static_cast<std::uint64_t>(kind.hi - kind.lo + 1))));
      } else {
        value = format_one_decimal(kind.lo + rng.uniform() * (kind.hi - kind.lo));
      }
      sentences.push_back(replace_all(kind.text, "{v}", value));
    }
    // Gold findings land at a random position on every page.
    sentences.insert(sentences.begin() + static_cast<long>(rng.below(sentences.size() + 1)),
                     gold_sentence);
    ocr::PageWords page = layout_page(sentences, p, rng);
    if (config.noise_rate > 0.0) {
      page = inject_ocr_noise(page, config.noise_rate,
                              derive_seed(config.seed, "noise:" + report_id + ":" +
                                                           std::to_string(p)));
    }
    pages.push_back(std::move(page));
  }
  return {std::move(pages), std::move(gold)};
}

ocr::PageWords inject_ocr_noise(const ocr::PageWords& words, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) throw InvalidInputError("inject_ocr_noise: rate must be in [0,1)");
  ocr::PageWords out = words;
  if (rate == 0.0) return out;
  Rng rng(derive_seed(seed, "ocr-noise"));
  for (auto& w : out.words) {
    for (char& c : w.text) {
      if (!rng.bernoulli(rate)) continue;
      switch (c) {
        case 'l': c = rng.bernoulli(0.5) ? '!' : '|'; break;
        case 'S': c = '5'; break;
        case '5': c = 'S'; break;
        case 'O': c = '0'; break;
        case '0': c = 'O'; break;
        case 'i': c = '1'; break;
        default: break;
      }
    }
  }
  return out;
}

std::string generate_corpus(const SynthConfig& config, const std::string& out_dir) {
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "pages");

  std::string manifest;
  for (int r = 0; r < config.n_reports; ++r) {
    char rid[32];
    std::snprintf(rid, sizeof(rid), "R%05d", r);
    auto [pages, gold] = generate_report(config, rid);

    nlohmann::json entry;
    entry["report_id"] = rid;
    std::vector<std::string> page_paths;
    for (const auto& page : pages) {
      const std::string rel = "pages/" + std::string(rid) + "_p" + std::to_string(page.page) + ".tsv";
      write_file((fs::path(out_dir) / rel).string(), ocr::serialize_word_table({page}));
      page_paths.push_back(rel);
    }
    entry["pages"] = page_paths;
    entry["gold_ahi"] = gold.ahi_values;
    entry["gold_sao2"] = gold.sao2_values;
    manifest += entry.dump();
    manifest += '\n';
  }
  const std::string manifest_path = (fs::path(out_dir) / "manifest.jsonl").string();
  write_file(manifest_path, manifest);
  return manifest_path;
}

}  // namespace scandoc::synth
