#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ucd/checkpoint.hpp"
#include "ucd/cli.hpp"
#include "ucd/errors.hpp"
#include "ucd/metrics.hpp"
#include "ucd/probe.hpp"
#include "ucd/tabular.hpp"
#include "ucd/trainer.hpp"

namespace py = pybind11;
using namespace ucd;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// [n, d] array -> row-major values and d.
std::pair<std::vector<double>, std::size_t> rows_of(const Array& a, const char* what) {
  if (a.ndim() != 2) throw DimensionError(std::string(what) + ": expected a 2-d array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto d = static_cast<std::size_t>(a.shape(1));
  return {std::vector<double>(a.data(), a.data() + n * d), d};
}

Array to_array(std::span<const double> values, std::size_t rows, std::size_t cols) {
  Array out({rows, cols});
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

TabularGame game_from(const Array& q, const Array& p_g, const std::vector<std::size_t>& label_of) {
  auto [qv, card] = rows_of(q, "q");
  auto [pv, card_p] = rows_of(p_g, "p_g");
  TabularGame g;
  g.name = "python";
  g.n_points = label_of.size();
  g.classes = card;
  g.q = std::move(qv);
  g.p_g = std::move(pv);
  g.label_of = label_of;
  if (card_p != card || g.q.size() != g.n_points * card || g.p_g.size() != g.q.size()) {
    throw DimensionError("q, p_g and label_of disagree on the game size");
  }
  g.validate();
  return g;
}

TrainConfig config_from(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides,
                        std::optional<std::uint64_t> seed) {
  return cli::resolve_config(cli::ConfigArgs{path, overrides, seed});
}

py::dict metrics_dict(const EvalMetrics& m) {
  py::dict d;
  d["frechet_pooled"] = m.frechet_pooled;
  d["frechet_per_class"] = m.frechet_per_class;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  if (m.modes_covered) d["modes_covered"] = *m.modes_covered;
  return d;
}

py::dict probe_dict(const ProbeReport& r) {
  py::dict d;
  d["step"] = r.step;
  d["kind"] = to_string(r.kind);
  d["n_samples"] = r.n_samples;
  for (const auto& [k, acc] : r.top_k_accuracy) d[py::str("top" + std::to_string(k))] = acc;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ucdlab, m) {
  m.doc() = "Conditional GAN lab: unconditional discriminators, probes and the tabular oracle";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def_property_readonly("variant", [](const TrainConfig& c) { return std::string(to_string(c.variant)); })
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_property_readonly("lambda1", [](const TrainConfig& c) { return c.weights.lambda1; })
      .def_property_readonly("lambda2", [](const TrainConfig& c) { return c.weights.lambda2; })
      .def("resolved_text", &resolved_config_text)
      .def("__repr__", [](const TrainConfig& c) {
        return "<TrainConfig variant=" + std::string(to_string(c.variant)) + " seed=" + std::to_string(c.seed) +
               " steps=" + std::to_string(c.steps) + ">";
      });

  m.def("load_config", &config_from, py::arg("path") = std::nullopt, py::arg("overrides") = std::vector<std::string>{},
        py::arg("seed") = std::nullopt,
        "Config file, then KEY=VALUE overrides in order, then the seed. Starts from the variant defaults.");

  m.def(
      "train",
      [](const TrainConfig& cfg, const std::filesystem::path& outdir) {
        TrainReport r;
        {
          py::gil_scoped_release release;
          r = run_training(cfg, outdir);
        }
        py::dict d;
        d["steps"] = r.steps;
        py::list probes;
        for (const auto& p : r.probes) probes.append(probe_dict(p));
        d["probes"] = probes;
        if (r.final_metrics) d["metrics"] = metrics_dict(*r.final_metrics);
        d["log"] = r.log_path;
        d["checkpoint"] = r.checkpoint_path;
        return d;
      },
      py::arg("config"), py::arg("outdir"), "Runs the full schedule; writes log.jsonl, final.ckpt, resolved-config.txt.");

  m.def(
      "probe",
      [](const std::filesystem::path& checkpoint, const TrainConfig& cfg, std::size_t samples,
         const std::vector<std::size_t>& ks) {
        const Checkpoint ckpt = load_checkpoint(checkpoint);
        const Dataset data(cfg.data);
        Rng rng = make_stream(cfg.seed, streams::probe);
        return probe_dict(probe_discriminator(ckpt.discriminator, data.sample_labeled(samples, rng), ks));
      },
      py::arg("checkpoint"), py::arg("config"), py::arg("samples") = 10000,
      py::arg("ks") = std::vector<std::size_t>{1, 3}, "Classifier probe of a saved discriminator on fresh samples.");

  m.def(
      "sample",
      [](const TrainConfig& cfg, std::size_t n, std::uint64_t seed) {
        const Dataset data(cfg.data);
        Rng rng(seed);
        const LabeledBatch b = data.sample_labeled(n, rng);
        return py::make_tuple(to_array(b.x.data(), n, data.dim()), b.labels);
      },
      py::arg("config"), py::arg("n"), py::arg("seed") = 0, "Labeled samples from the config's dataset: (x, labels).");

  m.def(
      "frechet_distance",
      [](const Array& a, const Array& b) {
        auto [av, ad] = rows_of(a, "a");
        auto [bv, bd] = rows_of(b, "b");
        return frechet_distance(GaussianSummary::from_samples(av, ad), GaussianSummary::from_samples(bv, bd));
      },
      py::arg("a"), py::arg("b"), "Fréchet distance between Gaussians fitted to two [n, d] sample sets.");

  m.def(
      "precision_recall",
      [](const Array& real, const Array& fake, std::size_t k) {
        auto [rv, rd] = rows_of(real, "real");
        auto [fv, fd] = rows_of(fake, "fake");
        if (rd != fd) throw DimensionError("real and fake differ in dimension");
        const PrSummary s = knn_precision_recall(rv, fv, rd, k);
        return py::make_tuple(s.precision, s.recall);
      },
      py::arg("real"), py::arg("fake"), py::arg("k") = 3, "k-NN manifold precision and recall.");

  m.def(
      "closed_form_dstar",
      [](const Array& q, const Array& p_g, const std::vector<std::size_t>& label_of) {
        const TabularGame g = game_from(q, p_g, label_of);
        const TabularD d = closed_form_dstar(g);
        return to_array(d.values, g.n_points, g.classes);
      },
      py::arg("q"), py::arg("p_g"), py::arg("label_of"), "q / (q + p_g) per cell; 0/0 cells are 0.");

  m.def(
      "optimize_tabular_d",
      [](const Array& q, const Array& p_g, const std::vector<std::size_t>& label_of, double lambda1,
         const std::string& form) {
        const TabularGame g = game_from(q, p_g, label_of);
        OracleOptions opt;
        opt.lambda1 = lambda1;
        if (form == "ucd") {
          opt.form = TabularLossForm::ucd;
        } else if (form == "vanilla") {
          opt.form = TabularLossForm::vanilla;
        } else {
          throw ConfigError("form must be 'ucd' or 'vanilla', got '" + form + "'");
        }
        const TabularD d = optimize_tabular_d(g, opt);
        return to_array(d.values, g.n_points, g.classes);
      },
      py::arg("q"), py::arg("p_g"), py::arg("label_of"), py::arg("lambda1") = 0.02, py::arg("form") = "ucd",
      "Numerical optimum of the population discriminator loss over a tabular game.");

  m.def(
      "oracle",
      [](std::size_t random_games, std::uint64_t seed) {
        const auto games = builtin_suite(random_games, seed);
        const auto lambdas = default_lambda_grid();
        const Theorem1Report r = verify_theorem1(games, lambdas);
        double worst = 0.0;
        for (const auto& row : r.rows) worst = std::max(worst, row.max_deviation);
        py::dict d;
        d["games"] = games.size();
        d["lambdas"] = lambdas;
        d["max_deviation"] = worst;
        d["passed"] = r.passed();
        return d;
      },
      py::arg("random_games") = 50, py::arg("seed") = 2024,
      "Checks the optimized tabular discriminator against q / (q + p_g) over the builtin suite.");
}
