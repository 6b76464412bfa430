#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scandoc/classifiers.hpp"
#include "scandoc/deid.hpp"
#include "scandoc/evaluation.hpp"
#include "scandoc/nn_cbow.hpp"
#include "scandoc/nn_train.hpp"
#include "scandoc/synth.hpp"

namespace scandoc::pipe {

struct SplitConfig {
  double test_fraction = 0.30;
  std::string val_ratio = "6:1";
  std::uint64_t seed = 0;
  int train_subset = 0;  // 0 = use the full training set
};

struct ModelConfig {
  enum class Type { kClassical, kNeural };
  Type type = Type::kClassical;
  // classical
  cls::ClassifierSpec spec = cls::default_spec(cls::Kind::kLR);
  bool cv = false;  // 5-fold search over the default grid for spec.kind
  // neural
  nn::NetworkConfig network;
  nn::TrainConfig train;
  nn::CbowConfig cbow;
  bool pretrain_embeddings = true;
};

struct AblationConfig {
  enum class Kind { kPreprocess, kStructuredBranch, kTrainSize };
  Kind kind = Kind::kPreprocess;
  std::vector<int> sizes = {10, 25, 50, 100};  // train_size only
  bool independent_subsets = false;            // default: nested subsets
};

std::string ablation_kind_name(AblationConfig::Kind kind);

struct ExperimentConfig {
  std::string recipe = "gray";
  ModelConfig model;
  SplitConfig split;
  std::string manifest_path;
  std::string workdir;
  std::string lookup_path;  // optional de-id lookup CSV
  std::optional<AblationConfig> ablation;

  nlohmann::json to_json() const;
  // Strict parse: unknown keys anywhere are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_json_text(const std::string& text);
};

struct SplitSets {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

// Report-level split: floor(n * test_fraction) test reports, remainder split
// train:val by the a:b ratio. Deterministic per seed and independent of the
// input ordering.
SplitSets split_dataset(std::vector<std::string> report_ids, const SplitConfig& config);

struct ReportData {
  std::string report_id;
  std::vector<ocr::PageWords> pages;
  seg::GoldRecord gold;
};

struct Corpus {
  std::vector<ReportData> reports;  // sorted by report_id
  std::uint64_t manifest_hash = 0;
};

// Loads a JSONL manifest. Page entries ending in .tsv are parsed word tables;
// image entries are preprocessed with `recipe` and OCR'd (SCANDOC_OCR_CMD or
// the deterministic mock), with results cached under workdir/cache.
Corpus load_corpus(const ExperimentConfig& config);

struct RunRecord {
  std::string run_id;
  std::string run_dir;
  std::string status;  // "complete" or "failed:<stage>"
  nlohmann::json config_snapshot;
  std::uint64_t manifest_hash = 0;
  std::map<std::string, std::string> artifact_hashes;  // name -> hex hash
  eval::EvalReport metrics;
  std::string started_at;
  std::string finished_at;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

// One end-to-end run: load -> de-id -> segment/label -> features -> train ->
// score -> document selection -> EvalReport, everything under workdir/<run-id>.
// Completed runs are returned from disk unless force is set.
RunRecord run_experiment(const ExperimentConfig& config, bool force = false);

struct AblationResult {
  std::vector<RunRecord> runs;
  std::vector<eval::Comparison> comparisons;
};

AblationResult run_ablation(const ExperimentConfig& config, bool force = false, int jobs = 1);

std::string comparisons_to_csv(const std::vector<eval::Comparison>& comparisons);

// Per-instance test scores kept for paired comparisons across runs.
struct ScoreRow {
  std::string report_id;
  int page = 0;
  ocr::OrderKey order_key;
  double value = 0.0;
  int gold = 2;
  std::array<double, 3> prob{};
};

std::string scores_to_csv(const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> scores_from_csv(const std::string& text);

}  // namespace scandoc::pipe
