#include "scandoc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <mutex>
#include <set>
#include <thread>

#include "scandoc/errors.hpp"
#include "scandoc/hash.hpp"
#include "scandoc/image_io.hpp"
#include "scandoc/text.hpp"
#include "src/model_detail.hpp"

namespace scandoc::pipe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_keys(const json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw InvalidInputError("config: unknown key '" + key + "' in " + where);
    }
  }
}

std::pair<int, int> parse_ratio(const std::string& ratio) {
  const auto colon = ratio.find(':');
  if (colon == std::string::npos) throw InvalidInputError("split: ratio must look like '6:1'");
  const int a = std::stoi(ratio.substr(0, colon));
  const int b = std::stoi(ratio.substr(colon + 1));
  if (a <= 0 || b < 0) throw InvalidInputError("split: ratio parts must be positive");
  return {a, b};
}

}  // namespace

std::string ablation_kind_name(AblationConfig::Kind kind) {
  switch (kind) {
    case AblationConfig::Kind::kPreprocess: return "preprocess";
    case AblationConfig::Kind::kStructuredBranch: return "structured_branch";
    case AblationConfig::Kind::kTrainSize: return "train_size";
  }
  return "preprocess";
}

static AblationConfig::Kind ablation_kind_from_name(const std::string& name) {
  if (name == "preprocess") return AblationConfig::Kind::kPreprocess;
  if (name == "structured_branch") return AblationConfig::Kind::kStructuredBranch;
  if (name == "train_size") return AblationConfig::Kind::kTrainSize;
  throw InvalidInputError("config: unknown ablation kind '" + name + "'");
}

json ExperimentConfig::to_json() const {
  json j;
  j["recipe"] = recipe;
  json m;
  if (model.type == ModelConfig::Type::kClassical) {
    m["type"] = "classical";
    m["kind"] = cls::kind_name(model.spec.kind);
    m["hyperparams"] = model.spec.hyperparams;
    m["cv"] = model.cv;
  } else {
    m["type"] = "neural";
    m["network"] = json::parse(model.network.to_json());
    m["train"] = {{"batch_size", model.train.batch_size},
                  {"learning_rate", model.train.learning_rate},
                  {"epochs", model.train.epochs}};
    m["cbow"] = {{"window", model.cbow.window},
                 {"negatives", model.cbow.negatives},
                 {"epochs", model.cbow.epochs},
                 {"learning_rate", model.cbow.learning_rate}};
    m["pretrain_embeddings"] = model.pretrain_embeddings;
  }
  j["model"] = std::move(m);
  j["split"] = {{"test_fraction", split.test_fraction},
                {"val_ratio", split.val_ratio},
                {"seed", split.seed},
                {"train_subset", split.train_subset}};
  json paths = {{"manifest", manifest_path}, {"workdir", workdir}};
  if (!lookup_path.empty()) paths["lookup"] = lookup_path;
  j["paths"] = std::move(paths);
  if (ablation) {
    json a;
    a["kind"] = ablation_kind_name(ablation->kind);
    if (ablation->kind == AblationConfig::Kind::kTrainSize) {
      a["sizes"] = ablation->sizes;
      a["independent_subsets"] = ablation->independent_subsets;
    }
    j["ablation"] = std::move(a);
  }
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  require_keys(j, {"recipe", "model", "split", "paths", "ablation"}, "top level");
  ExperimentConfig c;
  c.recipe = j.value("recipe", std::string("gray"));
  img::recipe_from_name(c.recipe);  // validates

  const auto& m = j.at("model");
  const auto type = m.at("type").get<std::string>();
  if (type == "classical") {
    require_keys(m, {"type", "kind", "hyperparams", "cv"}, "model");
    c.model.type = ModelConfig::Type::kClassical;
    c.model.spec = cls::default_spec(cls::kind_from_name(m.at("kind").get<std::string>()));
    if (m.contains("hyperparams")) {
      for (const auto& [key, value] : m.at("hyperparams").items()) {
        c.model.spec.hyperparams[key] = value.get<double>();
      }
    }
    c.model.cv = m.value("cv", false);
  } else if (type == "neural") {
    require_keys(m, {"type", "network", "train", "cbow", "pretrain_embeddings"}, "model");
    c.model.type = ModelConfig::Type::kNeural;
    if (m.contains("network")) {
      require_keys(m.at("network"),
                   {"include_structured", "structured_ffnn_layers", "structured_width",
                    "structured_dropout", "encoder", "max_len", "embed_dim", "lstm_layers",
                    "lstm_hidden", "classifier_width", "classifier_dropout", "output",
                    "classes"},
                   "model.network");
      c.model.network = nn::NetworkConfig::from_json(m.at("network").dump());
    }
    if (m.contains("train")) {
      require_keys(m.at("train"), {"batch_size", "learning_rate", "epochs"}, "model.train");
      c.model.train.batch_size = m.at("train").value("batch_size", 64);
      c.model.train.learning_rate = m.at("train").value("learning_rate", 2e-4);
      c.model.train.epochs = m.at("train").value("epochs", 100);
    }
    if (m.contains("cbow")) {
      require_keys(m.at("cbow"), {"window", "negatives", "epochs", "learning_rate"},
                   "model.cbow");
      c.model.cbow.window = m.at("cbow").value("window", 5);
      c.model.cbow.negatives = m.at("cbow").value("negatives", 5);
      c.model.cbow.epochs = m.at("cbow").value("epochs", 5);
      c.model.cbow.learning_rate = m.at("cbow").value("learning_rate", 0.025);
    }
    c.model.pretrain_embeddings = m.value("pretrain_embeddings", true);
  } else {
    throw InvalidInputError("config: model.type must be 'classical' or 'neural'");
  }

  if (j.contains("split")) {
    const auto& s = j.at("split");
    require_keys(s, {"test_fraction", "val_ratio", "seed", "train_subset"}, "split");
    c.split.test_fraction = s.value("test_fraction", 0.30);
    c.split.val_ratio = s.value("val_ratio", std::string("6:1"));
    c.split.seed = s.value("seed", 0ULL);
    c.split.train_subset = s.value("train_subset", 0);
    if (c.split.test_fraction <= 0.0 || c.split.test_fraction >= 1.0) {
      throw InvalidInputError("config: split.test_fraction must be in (0,1)");
    }
    parse_ratio(c.split.val_ratio);
    if (c.split.train_subset < 0) throw InvalidInputError("config: negative train_subset");
  }

  const auto& p = j.at("paths");
  require_keys(p, {"manifest", "workdir", "lookup"}, "paths");
  c.manifest_path = p.at("manifest").get<std::string>();
  c.workdir = p.at("workdir").get<std::string>();
  c.lookup_path = p.value("lookup", std::string());

  if (j.contains("ablation") && !j.at("ablation").is_null()) {
    const auto& a = j.at("ablation");
    require_keys(a, {"kind", "sizes", "independent_subsets"}, "ablation");
    AblationConfig ab;
    ab.kind = ablation_kind_from_name(a.at("kind").get<std::string>());
    if (a.contains("sizes")) ab.sizes = a.at("sizes").get<std::vector<int>>();
    ab.independent_subsets = a.value("independent_subsets", false);
    c.ablation = ab;
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  return from_json(json::parse(text));
}

SplitSets split_dataset(std::vector<std::string> report_ids, const SplitConfig& config) {
  if (report_ids.size() < 10) {
    throw InvalidInputError("split_dataset: need at least 10 reports");
  }
  std::sort(report_ids.begin(), report_ids.end());
  report_ids.erase(std::unique(report_ids.begin(), report_ids.end()), report_ids.end());
  Rng rng(derive_seed(config.seed, "split"));
  rng.shuffle(report_ids);

  const auto n = report_ids.size();
  const auto n_test = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * config.test_fraction));
  const auto [a, b] = parse_ratio(config.val_ratio);
  const std::size_t n_dev = n - n_test;
  const auto n_val = static_cast<std::size_t>(std::floor(
      static_cast<double>(n_dev) * static_cast<double>(b) / static_cast<double>(a + b)));

  SplitSets sets;
  sets.test.assign(report_ids.begin(), report_ids.begin() + static_cast<long>(n_test));
  sets.val.assign(report_ids.begin() + static_cast<long>(n_test),
                  report_ids.begin() + static_cast<long>(n_test + n_val));
  sets.train.assign(report_ids.begin() + static_cast<long>(n_test + n_val), report_ids.end());
  return sets;
}

Corpus load_corpus(const ExperimentConfig& config) {
  const std::string manifest_text = read_file(config.manifest_path);
  Corpus corpus;
  corpus.manifest_hash = fnv1a(manifest_text);
  const fs::path base = fs::path(config.manifest_path).parent_path();
  const auto recipe = img::recipe_from_name(config.recipe);

  std::unique_ptr<ocr::OcrEngine> engine;
  const fs::path cache_dir = fs::path(config.workdir) / "cache";

  std::istringstream stream(manifest_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty()) continue;
    json entry;
    try {
      entry = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    ReportData report;
    report.report_id = entry.at("report_id").get<std::string>();
    report.gold.report_id = report.report_id;
    report.gold.ahi_values = entry.at("gold_ahi").get<std::vector<double>>();
    report.gold.sao2_values = entry.at("gold_sao2").get<std::vector<double>>();

    int page_no = 0;
    for (const auto& page_entry : entry.at("pages")) {
      ++page_no;
      const std::string rel = page_entry.get<std::string>();
      const fs::path path = rel.front() == '/' ? fs::path(rel) : base / rel;
      if (path.extension() == ".tsv") {
        auto pages = ocr::parse_word_table(read_file(path.string()));
        ocr::PageWords page;
        page.page = page_no;
        if (!pages.empty()) {
          page.words = std::move(pages.front().words);
          for (auto& w : page.words) w.page = page_no;
        }
        page.source_image.clear();
        report.pages.push_back(std::move(page));
      } else {
        // Image page: preprocess with the recipe, then OCR (cached by content).
        const std::uint64_t key =
            fnv1a(config.recipe + ":" + hex64(hash_file(path.string())));
        const fs::path cached = cache_dir / ("ocr-" + hex64(key) + ".tsv");
        ocr::PageWords page;
        if (fs::exists(cached)) {
          auto pages = ocr::parse_word_table(read_file(cached.string()));
          if (!pages.empty()) page.words = std::move(pages.front().words);
        } else {
          if (!engine) {
            const char* cmd = std::getenv("SCANDOC_OCR_CMD");
            if (cmd && *cmd) {
              engine = std::make_unique<ocr::SubprocessEngine>(cmd);
            } else {
              engine = std::make_unique<ocr::MockEngine>(config.split.seed);
            }
          }
          const img::GrayImage gray = img::load_gray(path.string());
          const img::GrayImage prepped = img::apply_recipe(gray, recipe);
          page = ocr::run_ocr(prepped, *engine, page_no);
          fs::create_directories(cache_dir);
          // Temp-then-rename keeps concurrent ablation runs from torn writes.
          const fs::path tmp = cached.string() + "." + hex64(fnv1a(config.recipe)) + ".tmp";
          write_file(tmp.string(), ocr::serialize_word_table({page}));
          fs::rename(tmp, cached);
        }
        page.page = page_no;
        for (auto& w : page.words) w.page = page_no;
        page.source_image = path.string();
        report.pages.push_back(std::move(page));
      }
    }
    corpus.reports.push_back(std::move(report));
  }
  std::sort(corpus.reports.begin(), corpus.reports.end(),
            [](const ReportData& a, const ReportData& b) { return a.report_id < b.report_id; });
  for (std::size_t i = 1; i < corpus.reports.size(); ++i) {
    if (corpus.reports[i].report_id == corpus.reports[i - 1].report_id) {
      throw ParseError("manifest: duplicate report_id " + corpus.reports[i].report_id);
    }
  }
  return corpus;
}

json RunRecord::to_json() const {
  json j;
  j["run_id"] = run_id;
  j["run_dir"] = run_dir;
  j["status"] = status;
  j["config"] = config_snapshot;
  j["manifest_hash"] = hex64(manifest_hash);
  j["artifact_hashes"] = artifact_hashes;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j;
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.run_dir = j.at("run_dir").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.config_snapshot = j.at("config");
  r.manifest_hash = std::stoull(j.at("manifest_hash").get<std::string>(), nullptr, 16);
  r.artifact_hashes = j.at("artifact_hashes").get<std::map<std::string, std::string>>();
  r.started_at = j.value("started_at", std::string());
  r.finished_at = j.value("finished_at", std::string());
  return r;
}

std::string scores_to_csv(const std::vector<ScoreRow>& rows) {
  std::string out = "report_id,page,block,par,line,word,value,gold,p_ahi,p_sao2,p_other\n";
  for (const auto& r : rows) {
    out += csv_join({r.report_id, std::to_string(r.page), std::to_string(r.order_key.block),
                     std::to_string(r.order_key.par), std::to_string(r.order_key.line),
                     std::to_string(r.order_key.word), format_double(r.value),
                     std::to_string(r.gold), format_double(r.prob[0]),
                     format_double(r.prob[1]), format_double(r.prob[2])});
    out += '\n';
  }
  return out;
}

std::vector<ScoreRow> scores_from_csv(const std::string& text) {
  std::istringstream stream(text);
  std::string line;
  if (!std::getline(stream, line)) throw ParseError("scores CSV: empty");
  std::vector<ScoreRow> rows;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 11) throw ParseError("scores CSV: expected 11 fields");
    ScoreRow r;
    r.report_id = f[0];
    r.page = std::stoi(f[1]);
    r.order_key = {std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4]), std::stoi(f[5])};
    r.value = std::stod(f[6]);
    r.gold = std::stoi(f[7]);
    r.prob = {std::stod(f[8]), std::stod(f[9]), std::stod(f[10])};
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

struct SplitInstances {
  std::vector<seg::Instance> train;
  std::vector<seg::Instance> val;
  std::vector<seg::Instance> test;
};

std::vector<std::string> subset_train_ids(std::vector<std::string> train_ids,
                                          const SplitConfig& split, bool independent) {
  if (split.train_subset == 0) return train_ids;
  if (static_cast<std::size_t>(split.train_subset) > train_ids.size()) {
    throw InvalidInputError("train_subset exceeds the training set size");
  }
  std::sort(train_ids.begin(), train_ids.end());
  const std::string tag =
      independent ? "subset-" + std::to_string(split.train_subset) : "subset";
  Rng rng(derive_seed(split.seed, tag));
  rng.shuffle(train_ids);
  train_ids.resize(static_cast<std::size_t>(split.train_subset));
  return train_ids;
}

feat::FeatureVector maybe_scale(const feat::FeatureVector& v, const feat::Scaler* scaler) {
  return scaler ? feat::apply_scaler(v, *scaler) : v;
}

std::array<double, 6> structured_of(const seg::Instance& inst) {
  return {static_cast<double>(inst.left), static_cast<double>(inst.top),
          static_cast<double>(inst.width), static_cast<double>(inst.height),
          static_cast<double>(inst.page), inst.numeric_value};
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& config, bool force) {
  if (config.workdir.empty()) throw InvalidInputError("run_experiment: workdir not set");
  if (config.model.type == ModelConfig::Type::kNeural) config.model.network.validate();

  std::string stage = "load";
  const Corpus corpus = load_corpus(config);
  if (corpus.reports.empty()) throw InvalidInputError("run_experiment: empty corpus");

  const json snapshot = config.to_json();
  const std::string run_id =
      hex64(fnv1a(snapshot.dump() + ":" + hex64(corpus.manifest_hash)));
  const fs::path run_dir = fs::path(config.workdir) / run_id;

  RunRecord record;
  record.run_id = run_id;
  record.run_dir = run_dir.string();
  record.config_snapshot = snapshot;
  record.manifest_hash = corpus.manifest_hash;

  const fs::path record_path = run_dir / "run_record.json";
  if (!force && fs::exists(record_path)) {
    auto existing = RunRecord::from_json(json::parse(read_file(record_path.string())));
    if (existing.status == "complete") {
      existing.metrics =
          eval::EvalReport::from_json(read_file((run_dir / "eval_report.json").string()));
      return existing;
    }
  }
  fs::create_directories(run_dir);
  record.started_at = iso_now();

  try {
    // --- de-identification -------------------------------------------------
    stage = "deid";
    std::map<std::string, deid::DeidLookup> lookup;
    const bool have_lookup = !config.lookup_path.empty();
    if (have_lookup) lookup = deid::load_lookup_csv(read_file(config.lookup_path));

    std::vector<ReportData> reports = corpus.reports;
    for (auto& report : reports) {
      const deid::DeidLookup* entry = nullptr;
      if (have_lookup) {
        const auto it = lookup.find(report.report_id);
        if (it != lookup.end()) entry = &it->second;
      }
      const auto policy = have_lookup ? deid::MissingLookupPolicy::kStrict
                                      : deid::MissingLookupPolicy::kLenient;
      for (auto& page : report.pages) {
        page = deid::deidentify(page, entry, policy);
      }
    }

    // --- segmentation + labels --------------------------------------------
    stage = "segment";
    std::map<std::string, std::vector<seg::Instance>> by_report;
    std::string drop_log;
    std::string collision_log;
    for (auto& report : reports) {
      auto result = seg::segment_report(report.report_id, report.pages);
      for (const auto& d : result.dropped) {
        drop_log += d.report_id + " page " + std::to_string(d.page) + " index " +
                    std::to_string(d.index) + " token '" + d.token + "'\n";
      }
      const auto collisions = seg::assign_labels(result.instances, report.gold);
      for (const auto& c : collisions) {
        collision_log += c.report_id + " value " + format_double(c.value) +
                         " matches both AHI and SaO2; labeled AHI\n";
      }
      by_report.emplace(report.report_id, std::move(result.instances));
    }
    {
      std::vector<seg::Instance> all;
      for (const auto& [rid, list] : by_report) {
        all.insert(all.end(), list.begin(), list.end());
      }
      write_file((run_dir / "instances.csv").string(), seg::instances_to_csv(all));
      if (!drop_log.empty()) write_file((run_dir / "dropped_candidates.log").string(), drop_log);
      if (!collision_log.empty()) write_file((run_dir / "label_collisions.log").string(), collision_log);
    }

    // --- split --------------------------------------------------------------
    stage = "split";
    std::vector<std::string> ids;
    for (const auto& r : reports) ids.push_back(r.report_id);
    SplitSets sets = split_dataset(ids, config.split);
    // A training subset shrinks the train side only; dropped train reports are
    // excluded from the run, never re-routed.
    std::vector<std::string> active_train =
        subset_train_ids(sets.train, config.split,
                         config.ablation && config.ablation->independent_subsets);
    std::sort(sets.train.begin(), sets.train.end());
    std::sort(sets.val.begin(), sets.val.end());
    std::sort(sets.test.begin(), sets.test.end());
    std::sort(active_train.begin(), active_train.end());

    const auto in = [](const std::vector<std::string>& set, const std::string& id) {
      return std::binary_search(set.begin(), set.end(), id);
    };
    SplitInstances inst;
    for (const auto& [rid, list] : by_report) {
      std::vector<seg::Instance>* dst = nullptr;
      if (in(sets.train, rid)) {
        if (in(active_train, rid)) dst = &inst.train;
      } else if (in(sets.val, rid)) {
        dst = &inst.val;
      } else {
        dst = &inst.test;
      }
      if (dst) dst->insert(dst->end(), list.begin(), list.end());
    }
    if (inst.train.empty() || inst.test.empty()) {
      throw InvalidInputError("split produced an empty train or test set");
    }

    // --- features + training -----------------------------------------------
    std::vector<ScoreRow> score_rows;
    std::vector<eval::ScoredInstance> scored;

    if (config.model.type == ModelConfig::Type::kClassical) {
      stage = "features";
      // The classical protocol fits on the whole development split.
      std::vector<seg::Instance> dev = inst.train;
      dev.insert(dev.end(), inst.val.begin(), inst.val.end());

      std::vector<std::vector<std::string>> dev_tokens;
      dev_tokens.reserve(dev.size());
      for (const auto& i : dev) dev_tokens.push_back(feat::tokenize_normalize(i.segment));
      const feat::Vocabulary vocab = feat::fit_vocab(dev_tokens, 400);
      write_file((run_dir / "vocab.json").string(), vocab.to_json());

      const bool scale = config.model.spec.get("scale_structured", 1.0) != 0.0;
      std::vector<feat::FeatureVector> dev_vecs;
      dev_vecs.reserve(dev.size());
      for (const auto& i : dev) dev_vecs.push_back(feat::vectorize(i, vocab));
      std::optional<feat::Scaler> scaler;
      if (scale && dev_vecs.size() >= 2) {
        scaler = feat::fit_scaler(dev_vecs);
        write_file((run_dir / "scaler.json").string(), scaler->to_json());
      }

      cls::Dataset dev_data;
      dev_data.tfidf_dim = vocab.terms.size();
      for (std::size_t i = 0; i < dev.size(); ++i) {
        dev_data.x.push_back(maybe_scale(dev_vecs[i], scaler ? &*scaler : nullptr));
        dev_data.y.push_back(dev[i].label);
        dev_data.group.push_back(dev[i].report_id);
      }

      stage = "train";
      std::unique_ptr<cls::Model> model;
      if (config.model.cv) {
        auto cv = cls::cross_validate(cls::default_grid(config.model.spec.kind), dev_data, 5,
                                      config.split.seed);
        model = std::move(cv.final_model);
        json cv_json;
        cv_json["best"] = cls::detail::spec_to_json(cv.best_spec);
        cv_json["mean_accuracy"] = cv.mean_accuracy;
        write_file((run_dir / "cv_search.json").string(), cv_json.dump(2));
      } else {
        model = cls::train(config.model.spec, dev_data, config.split.seed);
      }
      const std::string model_json = model->to_json();
      write_file((run_dir / "model.json").string(), model_json);
      record.artifact_hashes["vocab"] = hex64(fnv1a(vocab.to_json()));
      if (scaler) record.artifact_hashes["scaler"] = hex64(fnv1a(scaler->to_json()));
      record.artifact_hashes["model"] = hex64(fnv1a(model_json));

      stage = "score";
      for (const auto& i : inst.test) {
        const auto vec = maybe_scale(feat::vectorize(i, vocab), scaler ? &*scaler : nullptr);
        const auto prob = model->predict_proba(vec);
        eval::ScoredInstance si;
        si.instance = i;
        si.prob = prob;
        si.gold = i.label;
        scored.push_back(std::move(si));
      }
    } else {
      stage = "features";
      std::vector<std::vector<std::string>> train_tokens;
      train_tokens.reserve(inst.train.size());
      for (const auto& i : inst.train) train_tokens.push_back(feat::tokenize_normalize(i.segment));
      const nn::TokenCodec codec = nn::TokenCodec::build(train_tokens);
      write_file((run_dir / "codec.json").string(), codec.to_json());

      const auto make_dataset = [&](const std::vector<seg::Instance>& list) {
        nn::NnDataset data;
        for (const auto& i : list) {
          data.structured.push_back(structured_of(i));
          data.token_ids.push_back(
              codec.encode(feat::tokenize_normalize(i.segment), config.model.network.max_len));
          data.labels.push_back(static_cast<int>(i.label));
        }
        return data;
      };
      const nn::NnDataset train_ds = make_dataset(inst.train);
      const nn::NnDataset val_ds = make_dataset(inst.val);
      const nn::NnDataset test_ds = make_dataset(inst.test);
      if (val_ds.size() == 0) throw InvalidInputError("neural training needs a validation split");

      stage = "train";
      nn::ParentNetwork net(config.model.network, codec.vocab_size(),
                            derive_seed(config.split.seed, "net"));
      if (config.model.pretrain_embeddings) {
        std::vector<std::vector<int>> cbow_corpus;
        cbow_corpus.reserve(train_tokens.size());
        for (const auto& tokens : train_tokens) {
          cbow_corpus.push_back(codec.encode(tokens, 1 << 20));
        }
        nn::CbowConfig cbow = config.model.cbow;
        cbow.dim = config.model.network.embed_dim;
        cbow.seed = derive_seed(config.split.seed, "cbow");
        const auto pretrained = nn::pretrain_cbow(cbow_corpus, codec.vocab_size(), cbow);
        net.set_embeddings(pretrained.embeddings);
      }
      nn::TrainConfig tconfig = config.model.train;
      tconfig.seed = derive_seed(config.split.seed, "train");
      auto result = nn::train_network(net, tconfig, train_ds, val_ds);
      net.restore(result.best);
      nn::save_checkpoint(result.best, (run_dir / "checkpoint.json").string(),
                          (run_dir / "params.bin").string());
      write_file((run_dir / "loss_history.csv").string(), result.history.to_csv());
      record.artifact_hashes["codec"] = hex64(fnv1a(codec.to_json()));
      record.artifact_hashes["checkpoint"] = hex64(hash_file((run_dir / "params.bin").string()));

      stage = "score";
      const nn::Matrix probs = nn::predict_probabilities(net, test_ds);
      for (std::size_t i = 0; i < inst.test.size(); ++i) {
        eval::ScoredInstance si;
        si.instance = inst.test[i];
        si.prob = {probs.at(static_cast<int>(i), 0), probs.at(static_cast<int>(i), 1),
                   probs.at(static_cast<int>(i), 2)};
        si.gold = inst.test[i].label;
        scored.push_back(std::move(si));
      }
    }

    for (const auto& s : scored) {
      ScoreRow row;
      row.report_id = s.instance.report_id;
      row.page = s.instance.page;
      row.order_key = s.instance.order_key;
      row.value = s.instance.numeric_value;
      row.gold = static_cast<int>(s.gold);
      row.prob = s.prob;
      score_rows.push_back(std::move(row));
    }
    write_file((run_dir / "scores.csv").string(), scores_to_csv(score_rows));

    // --- evaluation ----------------------------------------------------------
    stage = "evaluate";
    eval::EvalReport report;
    std::vector<seg::GoldRecord> test_gold;
    for (const auto& r : reports) {
      if (std::binary_search(sets.test.begin(), sets.test.end(), r.report_id)) {
        test_gold.push_back(r.gold);
      }
    }
    std::map<std::string, std::vector<eval::ScoredInstance>> scored_by_report;
    for (const auto& s : scored) scored_by_report[s.instance.report_id].push_back(s);

    for (const seg::Label cls_label : {seg::Label::kAhi, seg::Label::kSao2}) {
      const std::string name = seg::label_name(cls_label);
      const int target = static_cast<int>(cls_label);
      eval::ClassReport cr;
      const auto sm = eval::segment_metrics(scored, cls_label);
      cr.recall = sm.recall;
      cr.recall_defined = sm.recall_defined;
      cr.precision = sm.precision;
      cr.precision_defined = sm.precision_defined;

      std::vector<double> class_scores;
      std::vector<int> class_labels;
      for (const auto& s : scored) {
        class_scores.push_back(s.prob[target]);
        class_labels.push_back(static_cast<int>(s.gold) == target ? 1 : 0);
      }
      cr.auroc = eval::roc_auc(class_scores, class_labels);
      std::tie(cr.auroc_ci_low, cr.auroc_ci_high) = eval::delong_ci(class_scores, class_labels);

      std::string roc_csv = "fpr,tpr\n";
      for (const auto& [fpr, tpr] : eval::roc_points(class_scores, class_labels)) {
        roc_csv += format_double(fpr) + "," + format_double(tpr) + "\n";
      }
      write_file((run_dir / ("roc_" + name + ".csv")).string(), roc_csv);

      std::map<std::string, std::optional<double>> selections;
      for (const auto& g : test_gold) {
        const auto it = scored_by_report.find(g.report_id);
        if (it == scored_by_report.end() || it->second.empty()) {
          selections[g.report_id] = std::nullopt;
        } else {
          selections[g.report_id] =
              eval::select_document_value(it->second, cls_label).instance.numeric_value;
        }
      }
      cr.document = eval::document_accuracy(selections, test_gold, cls_label);
      report.per_class[name] = cr;
    }

    write_file((run_dir / "eval_report.json").string(), report.to_json());
    write_file((run_dir / "eval_report.txt").string(), report.to_text());
    record.metrics = std::move(report);
    record.status = "complete";
    record.finished_at = iso_now();
    write_file(record_path.string(), record.to_json().dump(2));
    return record;
  } catch (const std::exception& e) {
    record.status = "failed:" + stage + ": " + e.what();
    record.finished_at = iso_now();
    write_file(record_path.string(), record.to_json().dump(2));
    throw;
  }
}

namespace {

void run_variants(const std::vector<ExperimentConfig>& variants, std::vector<RunRecord>& out,
                  bool force, int jobs) {
  out.resize(variants.size());
  if (jobs < 2) {
    for (std::size_t i = 0; i < variants.size(); ++i) {
      out[i] = run_experiment(variants[i], force);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const int workers = std::min<int>(jobs, static_cast<int>(variants.size()));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= variants.size()) return;
        try {
          out[i] = run_experiment(variants[i], force);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::string comparisons_to_csv(const std::vector<eval::Comparison>& comparisons) {
  std::string out = "pair,metric,statistic,p_raw,p_adjusted\n";
  for (const auto& c : comparisons) {
    out += csv_join({c.pair, c.metric, format_double(c.statistic), format_double(c.p_raw),
                     format_double(c.p_adjusted)});
    out += '\n';
  }
  return out;
}

AblationResult run_ablation(const ExperimentConfig& config, bool force, int jobs) {
  if (!config.ablation) throw InvalidInputError("run_ablation: config has no ablation block");
  const AblationConfig ablation = *config.ablation;

  ExperimentConfig base = config;
  base.ablation.reset();

  std::vector<ExperimentConfig> variants;
  std::vector<std::string> names;
  switch (ablation.kind) {
    case AblationConfig::Kind::kPreprocess:
      for (const auto& recipe : img::all_recipes()) {
        ExperimentConfig v = base;
        v.recipe = img::recipe_name(recipe.name);
        variants.push_back(std::move(v));
        names.push_back(img::recipe_name(recipe.name));
      }
      break;
    case AblationConfig::Kind::kStructuredBranch: {
      if (base.model.type != ModelConfig::Type::kNeural) {
        throw InvalidInputError("structured_branch ablation requires a neural model");
      }
      for (const bool with : {true, false}) {
        ExperimentConfig v = base;
        v.model.network.include_structured = with;
        variants.push_back(std::move(v));
        names.push_back(with ? "with_structured" : "sequence_only");
      }
      break;
    }
    case AblationConfig::Kind::kTrainSize: {
      for (int size : ablation.sizes) {
        if (size <= 0) throw InvalidInputError("train_size ablation: sizes must be positive");
        ExperimentConfig v = base;
        v.split.train_subset = size;
        if (ablation.independent_subsets) v.ablation = ablation;  // marks independent sampling
        variants.push_back(std::move(v));
        names.push_back("n" + std::to_string(size));
      }
      ExperimentConfig v = base;
      v.split.train_subset = 0;
      variants.push_back(std::move(v));
      names.push_back("all");
      break;
    }
  }

  AblationResult result;
  run_variants(variants, result.runs, force, jobs);

  // Pairwise comparisons; Bonferroni across every test in the batch.
  struct Pending {
    std::string pair;
    std::string metric;
    double statistic;
    double p;
  };
  std::vector<Pending> pending;
  std::vector<std::vector<ScoreRow>> rows(result.runs.size());
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    rows[i] = scores_from_csv(
        read_file((fs::path(result.runs[i].run_dir) / "scores.csv").string()));
  }
  const auto pairable = [](const std::vector<ScoreRow>& a, const std::vector<ScoreRow>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].report_id != b[i].report_id || a[i].page != b[i].page ||
          !(a[i].order_key == b[i].order_key) || a[i].value != b[i].value) {
        return false;
      }
    }
    return true;
  };

  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    for (std::size_t j = i + 1; j < result.runs.size(); ++j) {
      const std::string pair = names[i] + " vs " + names[j];
      for (const seg::Label cls_label : {seg::Label::kAhi, seg::Label::kSao2}) {
        const std::string cname = seg::label_name(cls_label);
        const int target = static_cast<int>(cls_label);
        if (pairable(rows[i], rows[j])) {
          std::vector<double> sa, sb;
          std::vector<int> labels;
          for (std::size_t k = 0; k < rows[i].size(); ++k) {
            sa.push_back(rows[i][k].prob[target]);
            sb.push_back(rows[j][k].prob[target]);
            labels.push_back(rows[i][k].gold == target ? 1 : 0);
          }
          const auto d = eval::delong(sa, sb, labels);
          pending.push_back({pair, "auroc:" + cname, d.z, d.p_two_sided});
        }
        const auto& da = result.runs[i].metrics.per_class.at(cname).document;
        const auto& db = result.runs[j].metrics.per_class.at(cname).document;
        try {
          const auto chi = eval::chi_square_2x2(da.correct, da.total, db.correct, db.total);
          pending.push_back({pair, "docacc:" + cname, chi.statistic, chi.p});
        } catch (const NumericError&) {
          // A zero expected cell only happens when both groups sit at the same
          // boundary (all correct or all incorrect): identical proportions.
          pending.push_back({pair, "docacc:" + cname, 0.0, 1.0});
        }
      }
    }
  }

  std::vector<double> raw;
  for (const auto& p : pending) raw.push_back(p.p);
  const auto adjusted = eval::bonferroni(raw);
  for (std::size_t i = 0; i < pending.size(); ++i) {
    result.comparisons.push_back(
        {pending[i].pair, pending[i].metric, pending[i].statistic, pending[i].p, adjusted[i]});
  }

  const std::string ablation_id =
      hex64(fnv1a(config.to_json().dump() + ":" + ablation_kind_name(ablation.kind)));
  const fs::path dir = fs::path(config.workdir) / ("ablation-" + ablation_id);
  fs::create_directories(dir);
  write_file((dir / "comparisons.csv").string(), comparisons_to_csv(result.comparisons));
  json runs_json = json::array();
  for (const auto& r : result.runs) runs_json.push_back(r.run_id);
  write_file((dir / "runs.json").string(), runs_json.dump(2));
  return result;
}

}  // namespace scandoc::pipe
