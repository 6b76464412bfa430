#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "scandoc/errors.hpp"
#include "scandoc/evaluation.hpp"
#include "scandoc/features.hpp"
#include "scandoc/image.hpp"
#include "scandoc/pipeline.hpp"
#include "scandoc/synth.hpp"
#include "scandoc/text.hpp"

namespace py = pybind11;
using namespace scandoc;

namespace {

img::GrayImage gray_from_array(const py::array_t<std::uint8_t, py::array::c_style>& a) {
  if (a.ndim() != 2) throw InvalidInputError("expected a HxW uint8 array");
  img::GrayImage out(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(out.data.data(), a.data(), out.data.size());
  return out;
}

py::array_t<std::uint8_t> gray_to_array(const img::GrayImage& image) {
  py::array_t<std::uint8_t> out({image.height, image.width});
  std::memcpy(out.mutable_data(), image.data.data(), image.data.size());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "scandoc core: image preprocessing, OCR word tables, segmentation, "
            "features, evaluation, synthetic corpora and pipeline runs";

  py::register_exception<Error>(m, "ScandocError");

  // ---- image preprocessing -------------------------------------------------
  m.def(
      "to_grayscale",
      [](const py::array_t<std::uint8_t, py::array::c_style>& rgb) {
        if (rgb.ndim() != 3 || rgb.shape(2) != 3) {
          throw InvalidInputError("expected a HxWx3 uint8 array");
        }
        img::RgbImage image(static_cast<int>(rgb.shape(1)), static_cast<int>(rgb.shape(0)));
        std::memcpy(image.data.data(), rgb.data(), image.data.size());
        return gray_to_array(img::to_grayscale(image));
      },
      py::arg("rgb"), "BT.601 luminance conversion of an HxWx3 uint8 array");
  m.def(
      "morph",
      [](const py::array_t<std::uint8_t, py::array::c_style>& gray, const std::string& op,
         int kernel, int iterations) {
        const auto kind = op == "dilate" ? img::MorphOp::kDilate : img::MorphOp::kErode;
        if (op != "dilate" && op != "erode") throw InvalidInputError("op must be dilate|erode");
        return gray_to_array(img::morph(gray_from_array(gray), kind, kernel, iterations));
      },
      py::arg("gray"), py::arg("op"), py::arg("kernel") = 3, py::arg("iterations") = 1);
  m.def(
      "adjust_contrast",
      [](const py::array_t<std::uint8_t, py::array::c_style>& gray, int percent) {
        return gray_to_array(img::adjust_contrast(gray_from_array(gray), percent));
      },
      py::arg("gray"), py::arg("percent"));
  m.def(
      "apply_recipe",
      [](const py::array_t<std::uint8_t, py::array::c_style>& gray, const std::string& name) {
        return gray_to_array(img::apply_recipe(gray_from_array(gray), img::recipe_from_name(name)));
      },
      py::arg("gray"), py::arg("recipe"));
  m.def("recipes", [] {
    std::vector<std::string> names;
    for (const auto& r : img::all_recipes()) names.push_back(img::recipe_name(r.name));
    return names;
  });

  // ---- OCR word tables -------------------------------------------------------
  py::class_<ocr::OrderKey>(m, "OrderKey")
      .def_readonly("block", &ocr::OrderKey::block)
      .def_readonly("par", &ocr::OrderKey::par)
      .def_readonly("line", &ocr::OrderKey::line)
      .def_readonly("word", &ocr::OrderKey::word);
  py::class_<ocr::WordBox>(m, "WordBox")
      .def_readonly("text", &ocr::WordBox::text)
      .def_readonly("left", &ocr::WordBox::left)
      .def_readonly("top", &ocr::WordBox::top)
      .def_readonly("width", &ocr::WordBox::width)
      .def_readonly("height", &ocr::WordBox::height)
      .def_readonly("page", &ocr::WordBox::page)
      .def_readonly("order_key", &ocr::WordBox::order_key)
      .def_readonly("confidence", &ocr::WordBox::confidence)
      .def("__repr__", [](const ocr::WordBox& w) {
        return "WordBox('" + w.text + "', left=" + std::to_string(w.left) +
               ", top=" + std::to_string(w.top) + ")";
      });
  py::class_<ocr::PageWords>(m, "PageWords")
      .def_readonly("page", &ocr::PageWords::page)
      .def_readonly("words", &ocr::PageWords::words);
  m.def("parse_word_table", &ocr::parse_word_table, py::arg("tsv_text"));
  m.def("serialize_word_table", &ocr::serialize_word_table, py::arg("pages"));

  // ---- segmentation -----------------------------------------------------------
  py::class_<seg::Instance>(m, "Instance")
      .def_readonly("report_id", &seg::Instance::report_id)
      .def_readonly("left", &seg::Instance::left)
      .def_readonly("top", &seg::Instance::top)
      .def_readonly("width", &seg::Instance::width)
      .def_readonly("height", &seg::Instance::height)
      .def_readonly("page", &seg::Instance::page)
      .def_readonly("numeric_value", &seg::Instance::numeric_value)
      .def_readonly("segment", &seg::Instance::segment)
      .def_property_readonly("label",
                             [](const seg::Instance& i) { return seg::label_name(i.label); });
  m.def("parse_numeric", [](const std::string& token) {
    return seg::parse_numeric(token);  // None for unparseable candidates
  });
  m.def(
      "segment_report",
      [](const std::string& report_id, const std::vector<ocr::PageWords>& pages,
         const std::vector<double>& gold_ahi, const std::vector<double>& gold_sao2) {
        auto result = seg::segment_report(report_id, pages);
        seg::GoldRecord gold{report_id, gold_ahi, gold_sao2};
        seg::assign_labels(result.instances, gold);
        return result.instances;
      },
      py::arg("report_id"), py::arg("pages"), py::arg("gold_ahi") = std::vector<double>{},
      py::arg("gold_sao2") = std::vector<double>{});
  m.def("instances_to_csv", &seg::instances_to_csv);

  // ---- features -----------------------------------------------------------------
  m.def("tokenize_normalize", &feat::tokenize_normalize, py::arg("segment"));
  m.def("stopword_count", [] { return feat::stopwords().size(); });

  // ---- evaluation -----------------------------------------------------------------
  m.def("roc_auc", &eval::roc_auc, py::arg("scores"), py::arg("labels"));
  m.def(
      "delong",
      [](const std::vector<double>& a, const std::vector<double>& b,
         const std::vector<int>& labels) {
        const auto d = eval::delong(a, b, labels);
        py::dict out;
        out["auc_a"] = d.auc_a;
        out["auc_b"] = d.auc_b;
        out["z"] = d.z;
        out["p"] = d.p_two_sided;
        return out;
      },
      py::arg("scores_a"), py::arg("scores_b"), py::arg("labels"));
  m.def("delong_ci", &eval::delong_ci, py::arg("scores"), py::arg("labels"),
        py::arg("level") = 0.95);
  m.def(
      "chi_square_2x2",
      [](std::size_t ca, std::size_t na, std::size_t cb, std::size_t nb) {
        const auto r = eval::chi_square_2x2(ca, na, cb, nb);
        return py::make_tuple(r.statistic, r.p);
      },
      py::arg("correct_a"), py::arg("n_a"), py::arg("correct_b"), py::arg("n_b"));
  m.def("bonferroni", &eval::bonferroni, py::arg("p_values"));

  // ---- synthetic corpus + pipeline ---------------------------------------------
  m.def(
      "generate_corpus",
      [](const std::string& out_dir, int n_reports, double noise_rate, int distractors,
         std::uint64_t seed, int pages_min, int pages_max) {
        synth::SynthConfig config;
        config.n_reports = n_reports;
        config.noise_rate = noise_rate;
        config.distractor_density = distractors;
        config.seed = seed;
        config.pages_min = pages_min;
        config.pages_max = pages_max;
        return synth::generate_corpus(config, out_dir);
      },
      py::arg("out_dir"), py::arg("n_reports") = 100, py::arg("noise_rate") = 0.0,
      py::arg("distractors") = 8, py::arg("seed") = 0, py::arg("pages_min") = 1,
      py::arg("pages_max") = 4);
  m.def(
      "split_dataset",
      [](std::vector<std::string> ids, double test_fraction, const std::string& val_ratio,
         std::uint64_t seed) {
        pipe::SplitConfig config;
        config.test_fraction = test_fraction;
        config.val_ratio = val_ratio;
        config.seed = seed;
        const auto sets = pipe::split_dataset(std::move(ids), config);
        py::dict out;
        out["train"] = sets.train;
        out["val"] = sets.val;
        out["test"] = sets.test;
        return out;
      },
      py::arg("report_ids"), py::arg("test_fraction") = 0.30, py::arg("val_ratio") = "6:1",
      py::arg("seed") = 0);
  m.def(
      "run_experiment",
      [](const std::string& config_json, bool force) {
        const auto record =
            pipe::run_experiment(pipe::ExperimentConfig::from_json_text(config_json), force);
        py::dict out;
        out["run_id"] = record.run_id;
        out["run_dir"] = record.run_dir;
        out["status"] = record.status;
        out["eval_report"] = record.metrics.to_json();
        return out;
      },
      py::arg("config_json"), py::arg("force") = false,
      "Runs the full pipeline for an experiment config (JSON text); returns run "
      "metadata with the evaluation report as JSON");
}
