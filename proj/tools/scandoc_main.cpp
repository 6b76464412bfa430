#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "scandoc/errors.hpp"
#include "scandoc/image_io.hpp"
#include "scandoc/pipeline.hpp"
#include "scandoc/text.hpp"

namespace fs = std::filesystem;
using namespace scandoc;

namespace {

pipe::ExperimentConfig load_config(const std::string& config_path,
                                   const std::optional<std::uint64_t>& seed,
                                   const std::string& workdir) {
  if (config_path.empty()) {
    throw InvalidInputError("--config <json> is required for this subcommand");
  }
  auto config = pipe::ExperimentConfig::from_json_text(read_file(config_path));
  if (seed) config.split.seed = *seed;
  if (!workdir.empty()) config.workdir = workdir;
  return config;
}

void print_run(const pipe::RunRecord& record) {
  std::cout << "run " << record.run_id << " [" << record.status << "] -> " << record.run_dir
            << "\n\n"
            << record.metrics.to_text();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scandoc: numeric field extraction from scanned-document word streams"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string workdir;
  bool force = false;
  int jobs = 1;
  app.add_option("--config", config_path, "Experiment config JSON")->envname("SCANDOC_CONFIG");
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--workdir", workdir, "Override the config workdir");
  app.add_flag("--force", force, "Re-run even if a completed run exists");
  app.add_option("--jobs", jobs, "Parallel runs inside an ablation")->check(CLI::PositiveNumber);

  // --- synth ---------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string synth_out;
  synth::SynthConfig synth_config;
  std::string pages_range = "1:4";
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--reports", synth_config.n_reports, "Number of reports");
  synth_cmd->add_option("--pages", pages_range, "Pages per report, MIN:MAX");
  synth_cmd->add_option("--distractors", synth_config.distractor_density,
                        "Distractor sentences per page");
  synth_cmd->add_option("--noise-rate", synth_config.noise_rate,
                        "Per-character OCR confusion probability");
  synth_cmd->callback([&] {
    const auto colon = pages_range.find(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--pages must be MIN:MAX");
    synth_config.pages_min = std::stoi(pages_range.substr(0, colon));
    synth_config.pages_max = std::stoi(pages_range.substr(colon + 1));
    synth_config.seed = seed.value_or(0);
    const std::string manifest = synth::generate_corpus(synth_config, synth_out);
    std::cout << "wrote " << manifest << "\n";
  });

  // --- preprocess ------------------------------------------------------------
  auto* prep_cmd = app.add_subcommand("preprocess", "Apply an image preprocessing recipe");
  std::string prep_recipe = "gray_de_c20";
  std::string prep_out;
  std::vector<std::string> prep_images;
  prep_cmd->add_option("--recipe", prep_recipe, "gray|gray_de|gray_c20|gray_c60|gray_de_c20|gray_de_c60");
  prep_cmd->add_option("--out", prep_out, "Output directory")->required();
  prep_cmd->add_option("images", prep_images, "Input images (png/pgm/ppm)")->required();
  prep_cmd->callback([&] {
    const auto recipe = img::recipe_from_name(prep_recipe);
    fs::create_directories(prep_out);
    for (const auto& path : prep_images) {
      const img::GrayImage out = img::apply_recipe(img::load_gray(path), recipe);
      const fs::path dst = fs::path(prep_out) / (fs::path(path).stem().string() + ".png");
      img::save_gray(dst.string(), out);
      std::cout << dst.string() << "\n";
    }
  });

  // --- ocr -------------------------------------------------------------------
  auto* ocr_cmd = app.add_subcommand("ocr", "Run OCR over images, writing word tables");
  std::string ocr_out;
  std::string ocr_engine;
  bool overlay = false;
  std::vector<std::string> ocr_images;
  ocr_cmd->add_option("--out", ocr_out, "Output directory")->required();
  ocr_cmd->add_option("--engine", ocr_engine,
                      "Engine command (default: SCANDOC_OCR_CMD, else the deterministic mock)");
  ocr_cmd->add_flag("--overlay", overlay, "Write <image>.overlay.png beside each source");
  ocr_cmd->add_option("images", ocr_images, "Input images")->required();
  ocr_cmd->callback([&] {
    std::unique_ptr<ocr::OcrEngine> engine;
    if (!ocr_engine.empty()) {
      engine = std::make_unique<ocr::SubprocessEngine>(ocr_engine);
    } else if (const char* cmd = std::getenv("SCANDOC_OCR_CMD"); cmd && *cmd) {
      engine = std::make_unique<ocr::SubprocessEngine>(cmd);
    } else {
      engine = std::make_unique<ocr::MockEngine>(seed.value_or(0));
    }
    fs::create_directories(ocr_out);
    int page_no = 0;
    for (const auto& path : ocr_images) {
      const img::GrayImage gray = img::load_gray(path);
      const ocr::PageWords words = ocr::run_ocr(gray, *engine, ++page_no);
      const fs::path dst = fs::path(ocr_out) / (fs::path(path).stem().string() + ".tsv");
      write_file(dst.string(), ocr::serialize_word_table({words}));
      std::cout << dst.string() << " (" << words.words.size() << " words)\n";
      if (overlay) {
        const img::GrayImage marked = ocr::render_overlay(gray, words);
        img::save_gray(path + ".overlay.png", marked);
      }
    }
  });

  // --- deid ------------------------------------------------------------------
  auto* deid_cmd = app.add_subcommand("deid", "Scrub names/MRNs/dates from word tables");
  std::string lookup_path;
  std::string deid_policy = "strict";
  std::string deid_out;
  std::vector<std::string> deid_tsvs;
  deid_cmd->add_option("--lookup", lookup_path, "Lookup CSV (report_id,name_tokens,mrn_values)");
  deid_cmd->add_option("--policy", deid_policy, "strict|lenient for missing lookup entries");
  deid_cmd->add_option("--out", deid_out, "Output directory")->required();
  deid_cmd->add_option("tables", deid_tsvs, "Word-table TSVs named <report_id>*.tsv")->required();
  deid_cmd->callback([&] {
    std::map<std::string, deid::DeidLookup> lookup;
    if (!lookup_path.empty()) lookup = deid::load_lookup_csv(read_file(lookup_path));
    const auto policy = deid_policy == "lenient" ? deid::MissingLookupPolicy::kLenient
                                                 : deid::MissingLookupPolicy::kStrict;
    fs::create_directories(deid_out);
    for (const auto& path : deid_tsvs) {
      auto pages = ocr::parse_word_table(read_file(path));
      const std::string stem = fs::path(path).stem().string();
      const std::string report_id = stem.substr(0, stem.find('_'));
      const deid::DeidLookup* entry = nullptr;
      if (auto it = lookup.find(report_id); it != lookup.end()) entry = &it->second;
      for (auto& page : pages) {
        page = deid::deidentify(page, entry,
                                entry ? deid::MissingLookupPolicy::kStrict : policy);
      }
      const fs::path dst = fs::path(deid_out) / fs::path(path).filename();
      write_file(dst.string(), ocr::serialize_word_table(pages));
      std::cout << dst.string() << "\n";
    }
  });

  // --- segment -----------------------------------------------------------------
  auto* seg_cmd = app.add_subcommand("segment", "Build the labeled instance table from a manifest");
  std::string seg_manifest;
  std::string seg_out = "instances.csv";
  seg_cmd->add_option("--manifest", seg_manifest, "Corpus manifest (JSONL)")->required();
  seg_cmd->add_option("--out", seg_out, "Instance CSV path");
  seg_cmd->callback([&] {
    pipe::ExperimentConfig config;
    config.manifest_path = seg_manifest;
    config.workdir = workdir.empty() ? fs::temp_directory_path().string() : workdir;
    const auto corpus = pipe::load_corpus(config);
    std::vector<seg::Instance> all;
    for (const auto& report : corpus.reports) {
      std::vector<ocr::PageWords> pages;
      pages.reserve(report.pages.size());
      for (const auto& page : report.pages) {
        pages.push_back(deid::deidentify(page, nullptr, deid::MissingLookupPolicy::kLenient));
      }
      auto result = seg::segment_report(report.report_id, pages);
      seg::assign_labels(result.instances, report.gold);
      all.insert(all.end(), result.instances.begin(), result.instances.end());
    }
    write_file(seg_out, seg::instances_to_csv(all));
    std::cout << "wrote " << seg_out << " (" << all.size() << " instances)\n";
  });

  // --- train / evaluate / ablate / report ---------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Run the pipeline through training and evaluation");
  train_cmd->callback([&] { print_run(pipe::run_experiment(load_config(config_path, seed, workdir), force)); });

  auto* eval_cmd = app.add_subcommand("evaluate", "Run (or load) an experiment and print its report");
  eval_cmd->callback([&] { print_run(pipe::run_experiment(load_config(config_path, seed, workdir), force)); });

  auto* ablate_cmd = app.add_subcommand("ablate", "Run the configured ablation harness");
  ablate_cmd->callback([&] {
    const auto result =
        pipe::run_ablation(load_config(config_path, seed, workdir), force, jobs);
    for (const auto& run : result.runs) print_run(run);
    std::cout << "\n" << pipe::comparisons_to_csv(result.comparisons);
  });

  auto* report_cmd = app.add_subcommand("report", "Print the report of a finished run directory");
  std::string run_dir;
  report_cmd->add_option("--run", run_dir, "Run directory (workdir/<run-id>)")->required();
  report_cmd->callback([&] {
    std::cout << read_file((fs::path(run_dir) / "eval_report.txt").string());
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
