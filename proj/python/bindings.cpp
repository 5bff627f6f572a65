#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "diagan/drs.hpp"
#include "diagan/errors.hpp"
#include "diagan/metrics.hpp"
#include "diagan/pipeline.hpp"

namespace py = pybind11;
using namespace diagan;

namespace {

py::dict dataset_dict(const LabeledDataset& d) {
  std::vector<int> group(d.group.size());
  for (std::size_t i = 0; i < group.size(); ++i) group[i] = static_cast<int>(d.group[i]);
  py::dict out;
  out["points"] = d.points;
  out["group"] = group;
  out["mode_index"] = d.mode_index;
  out["seed"] = d.seed;
  return out;
}

// Rows are samples, columns are recorded steps.
LdrLog log_from_matrix(const Matrix& ldr_values) {
  LdrLog log(static_cast<std::size_t>(ldr_values.rows()));
  for (Eigen::Index c = 0; c < ldr_values.cols(); ++c) log.append(c + 1, ldr_values.col(c));
  return log;
}

}  // namespace

PYBIND11_MODULE(_diagan, m) {
  m.doc() = "Bindings for the diagan C++ library";

  // Translators are tried newest first, so the specific one goes last.
  py::register_exception<Error>(m, "DiaganError", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ConfigError", PyExc_ValueError);

  py::enum_<Group>(m, "Group")
      .value("neither", Group::neither)
      .value("major", Group::major)
      .value("minor", Group::minor);

  m.def("gen_single_gaussian", [](double sigma, std::size_t n, std::uint64_t seed) {
    return dataset_dict(gen_single_gaussian(sigma, n, seed));
  }, py::arg("sigma"), py::arg("n"), py::arg("seed"));
  m.def("gen_25_gaussians", [](std::size_t n, std::uint64_t seed) { return dataset_dict(gen_25_gaussians(n, seed)); },
        py::arg("n") = 10000, py::arg("seed"));

  m.def("ldr", &clamped_ldr, py::arg("d_output"), "logit of a clamped discriminator output");
  m.def("compute_scores", [](const Matrix& ldr_values, double k, double floor, double max_ratio) {
    const ScoreTable t = compute_scores(log_from_matrix(ldr_values), k, ClipRule{floor, max_ratio});
    py::dict out;
    out["raw"] = t.raw;
    out["clipped"] = t.clipped;
    out["frequency"] = t.frequency;
    return out;
  }, py::arg("ldr_values"), py::arg("k") = 1.0, py::arg("floor") = 0.01, py::arg("max_ratio") = 50.0,
     "Discrepancy scores from an (samples x records) LDR matrix");

  m.def("f_hat", [](double ldr_x, double ldr_max, double gamma, double epsilon) {
    DrsState s;
    s.ldr_max = ldr_max;
    s.gamma = gamma;
    s.epsilon = epsilon;
    return f_hat(ldr_x, s);
  }, py::arg("ldr"), py::arg("ldr_max"), py::arg("gamma") = 0.0, py::arg("epsilon") = 1e-6);

  m.def("knn_thresholds", &knn_thresholds, py::arg("points"), py::arg("k") = 3);
  m.def("precision", &precision, py::arg("generated"), py::arg("real"), py::arg("k") = 3);
  m.def("recall", &recall, py::arg("real"), py::arg("generated"), py::arg("k") = 3);
  m.def("partial_recall", &partial_recall, py::arg("subset"), py::arg("generated"), py::arg("k") = 3);
  m.def("frechet_distance", [](const Matrix& a, const Matrix& b) { return frechet_distance(a, b).distance; },
        py::arg("a"), py::arg("b"));
  m.def("high_quality_counts", [](const Matrix& generated) {
    return high_quality_counts(generated, GaussianMixtureSpec::twenty_five()).counts;
  }, py::arg("generated"), "High-quality samples per mode of the 25-Gaussian grid");

  m.def("load_config", [](const std::string& text, const std::vector<std::string>& overrides) {
    const ExperimentConfig c = load_config(text, overrides);
    return py::make_tuple(c.to_text(), c.hash());
  }, py::arg("text"), py::arg("overrides") = std::vector<std::string>{},
     "Canonical config text and its hash");

  py::module_ run = m.def_submodule("run", "Pipeline commands operating on a run directory");
  run.def("train", [](const std::string& config_text, const std::filesystem::path& root,
                      const std::vector<std::string>& overrides) {
    cmd_train(load_config(config_text, overrides), root);
  }, py::arg("config_text"), py::arg("root"), py::arg("overrides") = std::vector<std::string>{});
  run.def("diagnose", [](const std::filesystem::path& root, std::optional<double> k) {
    return cmd_diagnose(root, k).frequency;
  }, py::arg("root"), py::arg("k") = std::nullopt);
  run.def("resample_train", [](const std::filesystem::path& root) { cmd_resample_train(root); }, py::arg("root"));
  run.def("drs", [](const std::filesystem::path& root, std::size_t n) { return cmd_drs(root, n).samples; },
          py::arg("root"), py::arg("n"));
  run.def("evaluate", [](const std::filesystem::path& root, std::optional<std::filesystem::path> samples,
                         const std::string& name) { return cmd_evaluate(root, samples, name); },
          py::arg("root"), py::arg("samples") = std::nullopt, py::arg("name") = "evaluate");
  run.def("report", &cmd_report, py::arg("root"));
}
