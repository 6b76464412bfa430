#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "scandoc/errors.hpp"
#include "scandoc/pipeline.hpp"
#include "scandoc/synth.hpp"

using namespace scandoc;
using namespace scandoc::synth;

TEST_CASE("generation is deterministic per (seed, report_id)") {
  SynthConfig config;
  config.seed = 42;
  const auto [pages_a, gold_a] = generate_report(config, "R1");
  const auto [pages_b, gold_b] = generate_report(config, "R1");
  CHECK(pages_a == pages_b);
  CHECK(gold_a.ahi_values == gold_b.ahi_values);
  CHECK(gold_a.sao2_values == gold_b.sao2_values);

  const auto [pages_c, gold_c] = generate_report(config, "R2");
  CHECK(gold_c.ahi_values != gold_a.ahi_values);
}

TEST_CASE("noiseless reports round-trip their gold values") {
  SynthConfig config;
  config.seed = 7;
  config.noise_rate = 0.0;
  config.distractor_density = 6;
  for (int r = 0; r < 25; ++r) {
    const std::string rid = "R" + std::to_string(r);
    const auto [pages, gold] = generate_report(config, rid);
    auto result = seg::segment_report(rid, pages);
    seg::assign_labels(result.instances, gold);
    bool found_ahi = false, found_sao2 = false;
    for (const auto& inst : result.instances) {
      if (inst.label == seg::Label::kAhi &&
          std::fabs(inst.numeric_value - gold.ahi_values[0]) < 1e-9) {
        found_ahi = true;
      }
      if (inst.label == seg::Label::kSao2 &&
          std::fabs(inst.numeric_value - gold.sao2_values[0]) < 1e-9) {
        found_sao2 = true;
      }
    }
    REQUIRE(found_ahi);
    REQUIRE(found_sao2);
  }
}

TEST_CASE("gold tokens appear verbatim on every page") {
  SynthConfig config;
  config.seed = 19;
  config.noise_rate = 0.0;
  for (int r = 0; r < 10; ++r) {
    const auto [pages, gold] = generate_report(config, "R" + std::to_string(r));
    for (const auto& page : pages) {
      int gold_hits = 0;
      for (const auto& w : page.words) {
        const auto v = seg::parse_numeric(w.text);
        if (v && std::fabs(*v - gold.ahi_values[0]) < 1e-9) ++gold_hits;
      }
      REQUIRE(gold_hits >= 1);
    }
  }
}

TEST_CASE("single template, no distractors, one page: exactly two labeled instances") {
  SynthConfig config;
  config.seed = 3;
  config.distractor_density = 0;
  config.pages_min = config.pages_max = 1;
  config.templates = {{"AHI was {ahi} and SaO2 was {sao2} % .", 1.0}};
  int checked = 0;
  for (int r = 0; r < 30; ++r) {
    const auto [pages, gold] = generate_report(config, "R" + std::to_string(r));
    if (std::fabs(gold.ahi_values[0] - gold.sao2_values[0]) < 1e-9) continue;  // collision
    auto result = seg::segment_report("R" + std::to_string(r), pages);
    seg::assign_labels(result.instances, gold);
    std::size_t labeled = 0;
    for (const auto& inst : result.instances) {
      if (inst.label != seg::Label::kOther) ++labeled;
    }
    REQUIRE(labeled == 2);
    ++checked;
  }
  CHECK(checked > 20);
}

TEST_CASE("inject_ocr_noise contract") {
  SynthConfig config;
  config.seed = 5;
  const auto [pages, gold] = generate_report(config, "R0");
  const auto& page = pages[0];

  CHECK(inject_ocr_noise(page, 0.0, 1) == page);

  // Rate 1 rewrites every confusable character, deterministically per seed.
  ocr::PageWords ells;
  ocr::WordBox w;
  w.text = "lull";
  w.width = 10;
  w.height = 10;
  ells.words.push_back(w);
  const auto noised_a = inject_ocr_noise(ells, 0.999, 9);
  const auto noised_b = inject_ocr_noise(ells, 0.999, 9);
  CHECK(noised_a == noised_b);
  for (char c : noised_a.words[0].text) {
    CHECK((c == '!' || c == '|' || c == 'u'));
  }

  // Token count and geometry never change.
  const auto noisy = inject_ocr_noise(page, 0.3, 17);
  REQUIRE(noisy.words.size() == page.words.size());
  for (std::size_t i = 0; i < page.words.size(); ++i) {
    CHECK(noisy.words[i].left == page.words[i].left);
    CHECK(noisy.words[i].top == page.words[i].top);
    CHECK(noisy.words[i].width == page.words[i].width);
    CHECK(noisy.words[i].height == page.words[i].height);
    CHECK(noisy.words[i].text.size() == page.words[i].text.size());
  }

  CHECK_THROWS_AS(inject_ocr_noise(page, 1.0, 0), InvalidInputError);
}

TEST_CASE("low noise keeps most gold tokens intact (statistical)") {
  SynthConfig config;
  config.seed = 23;
  config.noise_rate = 0.02;
  int total = 0;
  int intact = 0;
  for (int r = 0; r < 60; ++r) {
    const std::string rid = "R" + std::to_string(r);
    const auto [pages, gold] = generate_report(config, rid);
    for (const auto& page : pages) {
      ++total;
      for (const auto& w : page.words) {
        const auto v = seg::parse_numeric(w.text);
        if (v && std::fabs(*v - gold.ahi_values[0]) < 1e-9) {
          ++intact;
          break;
        }
      }
    }
  }
  CHECK(static_cast<double>(intact) / total >= 0.95);
}

TEST_CASE("generate_corpus writes a loadable manifest") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "scandoc_synth_test";
  fs::remove_all(dir);
  SynthConfig config;
  config.seed = 4;
  config.n_reports = 6;
  const std::string manifest = generate_corpus(config, dir.string());
  CHECK(fs::exists(manifest));

  pipe::ExperimentConfig exp;
  exp.manifest_path = manifest;
  exp.workdir = (dir / "work").string();
  const auto corpus = pipe::load_corpus(exp);
  REQUIRE(corpus.reports.size() == 6);
  std::set<std::string> ids;
  for (const auto& report : corpus.reports) {
    ids.insert(report.report_id);
    REQUIRE(!report.pages.empty());
    const auto [pages, gold] = generate_report(config, report.report_id);
    REQUIRE(report.pages.size() == pages.size());
    for (std::size_t p = 0; p < pages.size(); ++p) {
      REQUIRE(report.pages[p].words == pages[p].words);
    }
    CHECK(report.gold.ahi_values == gold.ahi_values);
  }
  CHECK(ids.size() == 6);
  fs::remove_all(dir);
}
