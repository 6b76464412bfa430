#include <doctest.h>

#include <cmath>

#include "scandoc/errors.hpp"
#include "scandoc/features.hpp"
#include "scandoc/rng.hpp"

using namespace scandoc;
using namespace scandoc::feat;

namespace {

seg::Instance instance_with(const std::string& segment) {
  seg::Instance inst;
  inst.report_id = "r";
  inst.left = 100;
  inst.top = 200;
  inst.width = 50;
  inst.height = 20;
  inst.page = 1;
  inst.numeric_value = 19.5;
  inst.segment = segment;
  return inst;
}

}  // namespace

TEST_CASE("stopword list is the fixed 179-word set") {
  CHECK(stopwords().size() == 179);
  CHECK(stopwords().count("the"));
  CHECK(stopwords().count("wouldn't"));
  CHECK_FALSE(stopwords().count("apnea"));
}

TEST_CASE("tokenize_normalize") {
  CHECK(tokenize_normalize("The total APNEA/HYPOPNEA INDEX (AHI)") ==
        std::vector<std::string>{"total", "apnea/hypopnea", "index", "ahi"});
  CHECK(tokenize_normalize("").empty());
  CHECK(tokenize_normalize("THE THE THE").empty());
  CHECK(tokenize_normalize("  was 19.5 .  ") == std::vector<std::string>{"19.5"});
  CHECK(tokenize_normalize("(RERA)") == std::vector<std::string>{"rera"});
}

TEST_CASE("fit_vocab frequencies, ties, idf") {
  const Vocabulary tiny = fit_vocab({{"ahi", "ahi", "index"}});
  REQUIRE(tiny.terms.size() == 2);
  CHECK(tiny.terms[0] == "ahi");  // higher tf first
  CHECK(tiny.terms[1] == "index");
  CHECK(tiny.doc_count == 1);
  // idf = ln((1+1)/(1+1)) + 1 = 1 for both
  CHECK(tiny.idf[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tiny.idf[1] == doctest::Approx(1.0).epsilon(1e-12));

  // 500 distinct terms, cap 400: exactly 400 kept; equal-frequency ties break
  // lexicographically.
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 500; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "t%03d", i);
    corpus.push_back({name});
  }
  const Vocabulary capped = fit_vocab(corpus, 400);
  REQUIRE(capped.terms.size() == 400);
  CHECK(capped.terms.front() == "t000");
  CHECK(capped.terms.back() == "t399");
}

TEST_CASE("idf monotonicity in document frequency") {
  const Vocabulary v = fit_vocab({{"common", "rare1"}, {"common", "rare2"}, {"common"}});
  const auto idf_of = [&](const std::string& t) { return v.idf[v.index.at(t)]; };
  CHECK(idf_of("common") < idf_of("rare1"));
  CHECK(idf_of("rare1") == doctest::Approx(idf_of("rare2")));
  // Exact values: N=3, df(common)=3 -> ln(4/4)+1; df(rare)=1 -> ln(4/2)+1.
  CHECK(idf_of("common") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(idf_of("rare1") == doctest::Approx(std::log(2.0) + 1.0).epsilon(1e-12));
}

TEST_CASE("vectorize tf-idf block") {
  const Vocabulary vocab = fit_vocab({{"apnea", "index"}, {"apnea", "saturation"}});

  const auto none = vectorize(instance_with("nothing matches here"), vocab);
  CHECK(none.tfidf.empty());
  CHECK(none.structured[0] == 100.0);
  CHECK(none.structured[5] == doctest::Approx(19.5));

  const auto one = vectorize(instance_with("apnea"), vocab);
  REQUIRE(one.tfidf.size() == 1);
  CHECK(one.tfidf.begin()->second == doctest::Approx(1.0).epsilon(1e-12));

  const auto two = vectorize(instance_with("index saturation"), vocab);
  REQUIRE(two.tfidf.size() == 2);
  for (const auto& [idx, w] : two.tfidf) {
    CHECK(w == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  }

  // L2 norm of nonzero blocks is 1 within 1e-9 on random segments.
  Rng rng(3);
  const std::vector<std::string> pool = {"apnea", "index", "saturation", "was", "study", "rem"};
  for (int trial = 0; trial < 50; ++trial) {
    std::string segment;
    for (int k = 0; k < 12; ++k) {
      segment += pool[rng.below(pool.size())];
      segment += ' ';
    }
    const auto v = vectorize(instance_with(segment), vocab);
    if (v.tfidf.empty()) continue;
    double norm_sq = 0.0;
    for (const auto& [idx, w] : v.tfidf) norm_sq += w * w;
    REQUIRE(std::fabs(std::sqrt(norm_sq) - 1.0) < 1e-9);
  }
}

TEST_CASE("vocabulary is a function of the training split only") {
  const Vocabulary vocab = fit_vocab({{"apnea", "index"}, {"apnea"}});
  const std::string before = vocab.to_json();
  (void)vectorize(instance_with("totally new unseen words apnea"), vocab);
  CHECK(vocab.to_json() == before);
}

TEST_CASE("scaler") {
  FeatureVector a, b;
  a.structured = {50, 0, 0, 0, 1, 10};
  b.structured = {150, 0, 0, 0, 1, 30};
  const Scaler scaler = fit_scaler({a, b});

  // mean 100, population std 50 -> value 150 maps to 1.0
  FeatureVector probe;
  probe.structured = {150, 0, 0, 0, 1, 20};
  const auto scaled = apply_scaler(probe, scaler);
  CHECK(scaled.structured[0] == doctest::Approx(1.0).epsilon(1e-12));
  // Constant features pass through untouched.
  CHECK(scaled.structured[4] == 1.0);

  // Scaled training set has mean ~0 and std ~1 (recomputed independently).
  Rng rng(17);
  std::vector<FeatureVector> train;
  for (int i = 0; i < 200; ++i) {
    FeatureVector v;
    for (auto& f : v.structured) f = rng.normal(100.0, 37.0);
    train.push_back(v);
  }
  const Scaler s2 = fit_scaler(train);
  for (std::size_t f = 0; f < kStructuredDim; ++f) {
    double mean = 0.0;
    for (const auto& v : train) mean += apply_scaler(v, s2).structured[f];
    mean /= static_cast<double>(train.size());
    double var = 0.0;
    for (const auto& v : train) {
      const double d = apply_scaler(v, s2).structured[f] - mean;
      var += d * d;
    }
    var /= static_cast<double>(train.size());
    REQUIRE(std::fabs(mean) < 1e-9);
    REQUIRE(std::fabs(std::sqrt(var) - 1.0) < 1e-9);
  }

  CHECK_THROWS_AS(fit_scaler({a}), InvalidInputError);
}

TEST_CASE("errors and persistence") {
  CHECK_THROWS_AS(fit_vocab({}), InvalidInputError);
  CHECK_THROWS_AS(fit_vocab({{}, {}}), InvalidInputError);

  const Vocabulary vocab = fit_vocab({{"apnea", "index"}, {"apnea"}});
  const Vocabulary back = Vocabulary::from_json(vocab.to_json());
  CHECK(back.terms == vocab.terms);
  CHECK(back.doc_count == vocab.doc_count);
  REQUIRE(back.idf.size() == vocab.idf.size());
  for (std::size_t i = 0; i < back.idf.size(); ++i) {
    CHECK(back.idf[i] == doctest::Approx(vocab.idf[i]).epsilon(1e-15));
  }

  FeatureVector a, b;
  a.structured = {1, 2, 3, 4, 5, 6};
  b.structured = {2, 3, 4, 5, 6, 7};
  const Scaler scaler = fit_scaler({a, b});
  const Scaler s_back = Scaler::from_json(scaler.to_json());
  for (std::size_t f = 0; f < kStructuredDim; ++f) {
    CHECK(s_back.mean[f] == doctest::Approx(scaler.mean[f]).epsilon(1e-15));
    CHECK(s_back.stddev[f] == doctest::Approx(scaler.stddev[f]).epsilon(1e-15));
  }
}
