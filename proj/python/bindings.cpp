// Python bindings for the main operations. Domains cross the boundary as
// (id, group, X, y) with NumPy arrays and integer class labels.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "wjdot/adaptation.hpp"
#include "wjdot/experiment.hpp"
#include "wjdot/io.hpp"
#include "wjdot/ot.hpp"
#include "wjdot/scoring.hpp"
#include "wjdot/synthgen.hpp"

namespace py = pybind11;
using namespace wjdot;

namespace {

using Labels = std::vector<std::size_t>;

MatrixXd rows_of(const std::vector<JointSample>& samples) {
  MatrixXd x(static_cast<Eigen::Index>(samples.size()), samples.empty() ? 0 : samples.front().embedding.size());
  for (std::size_t i = 0; i < samples.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = samples[i].embedding.transpose();
  return x;
}

Labels labels_of(const std::vector<JointSample>& samples) {
  Labels y;
  for (const auto& s : samples) y.push_back(argmax(s.label));
  return y;
}

std::vector<JointSample> samples_of(const MatrixXd& x, const Labels& y, std::size_t num_classes) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DimensionError("X and y differ in length");
  std::vector<JointSample> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto k = y[static_cast<std::size_t>(i)];
    if (k >= num_classes) throw DimensionError("class index out of range");
    out.push_back({x.row(i).transpose(), one_hot(k, num_classes)});
  }
  return out;
}

std::vector<VectorXd> vectors_of(const MatrixXd& x) {
  std::vector<VectorXd> out;
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back(x.row(i).transpose());
  return out;
}

py::dict source_dict(const SourceDomain& s) {
  py::dict d;
  d["id"] = s.id;
  d["group"] = std::string(group_name(s.group));
  d["X"] = rows_of(s.samples);
  d["y"] = labels_of(s.samples);
  d["num_classes"] = s.num_classes();
  return d;
}

py::dict target_dict(const TargetDomain& t) {
  py::dict d;
  d["id"] = t.id;
  d["group"] = std::string(group_name(t.group));
  d["X"] = stack_rows(t.embeddings);
  d["X_test"] = rows_of(t.test);
  d["y_test"] = labels_of(t.test);
  return d;
}

SourceDomain make_source(const std::string& id, const MatrixXd& x, const Labels& y, std::size_t num_classes,
                         const std::string& group) {
  return {id, samples_of(x, y, num_classes), parse_group(group)};
}

TargetDomain make_target(const std::string& id, const MatrixXd& x, const MatrixXd& x_test,
                         const Labels& y_test, std::size_t num_classes, const std::string& group) {
  TargetDomain t;
  t.id = id;
  t.embeddings = vectors_of(x);
  if (x_test.rows() > 0) t.test = samples_of(x_test, y_test, num_classes);
  t.group = parse_group(group);
  return t;
}

py::dict wasserstein_dict(const ot::WassersteinResult& r) {
  py::dict d;
  d["value"] = r.value;
  d["transport_cost"] = r.transport_cost;
  d["plan"] = r.coupling.plan;
  d["phi"] = r.duals.phi;
  d["psi"] = r.duals.psi;
  d["converged"] = r.converged;
  d["iterations"] = r.iterations;
  return d;
}

py::dict adapt_dict(const adaptation::AdaptResult& r) {
  py::dict d;
  d["classifier"] = io::Checkpoint{std::nullopt, r.classifier};
  d["alpha"] = r.alpha.values();
  d["initial_objective"] = r.initial_objective;
  d["objective_trace"] = r.objective_trace;
  d["alpha_trajectory"] = r.alpha_trajectory;
  d["converged"] = r.converged;
  d["convergence_epoch"] = r.convergence_epoch;
  return d;
}

ot::SolverMode parse_mode(const std::string& m) {
  if (m == "exact") return ot::SolverMode::kExact;
  if (m == "entropic") return ot::SolverMode::kEntropic;
  throw ConfigError("mode must be 'exact' or 'entropic'");
}

}  // namespace

PYBIND11_MODULE(_wjdot, m) {
  m.doc() = "Multi-source domain adaptation by weighted joint optimal transport";

  // Translators are tried newest first, so the base class goes first.
  const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<SolverError>(m, "SolverError", base.ptr());

  py::class_<io::Checkpoint>(m, "Model")
      .def_property_readonly("has_extractor", [](const io::Checkpoint& c) { return c.extractor.has_value(); })
      .def_property_readonly("num_classes", [](const io::Checkpoint& c) { return c.classifier.num_classes(); })
      .def("embed",
           [](const io::Checkpoint& c, const MatrixXd& x) {
             return c.extractor ? c.extractor->embed(x) : x;
           })
      .def("predict_proba",
           [](const io::Checkpoint& c, const MatrixXd& x) {
             return c.classifier.predict_proba(c.extractor ? c.extractor->embed(x) : x);
           })
      .def("predict",
           [](const io::Checkpoint& c, const MatrixXd& x) {
             return c.classifier.predict(c.extractor ? c.extractor->embed(x) : x);
           })
      .def("with_classifier",
           [](const io::Checkpoint& c, const io::Checkpoint& other) {
             return io::Checkpoint{c.extractor, other.classifier};
           },
           "This model's extractor followed by another model's classifier.")
      .def("to_json", &io::checkpoint_to_json)
      .def_static("from_json", &io::checkpoint_from_json)
      .def("save", [](const io::Checkpoint& c, const std::filesystem::path& p) { io::save_checkpoint(p, c); })
      .def_static("load", &io::load_checkpoint)
      .def("__eq__", [](const io::Checkpoint& a, const io::Checkpoint& b) { return a == b; });

  py::class_<SourceDomain>(m, "SourceDomain")
      .def(py::init(&make_source), py::arg("id"), py::arg("X"), py::arg("y"), py::arg("num_classes"),
           py::arg("group") = "untagged")
      .def_readonly("id", &SourceDomain::id)
      .def_property_readonly("group", [](const SourceDomain& s) { return std::string(group_name(s.group)); })
      .def_property_readonly("X", [](const SourceDomain& s) { return rows_of(s.samples); })
      .def_property_readonly("y", [](const SourceDomain& s) { return labels_of(s.samples); })
      .def_property_readonly("num_classes", &SourceDomain::num_classes)
      .def("__len__", &SourceDomain::size)
      .def("__eq__", [](const SourceDomain& a, const SourceDomain& b) { return a == b; });

  py::class_<TargetDomain>(m, "TargetDomain")
      .def(py::init(&make_target), py::arg("id"), py::arg("X"), py::arg("X_test") = MatrixXd(0, 0),
           py::arg("y_test") = Labels{}, py::arg("num_classes") = 0, py::arg("group") = "untagged")
      .def_readonly("id", &TargetDomain::id)
      .def_property_readonly("group", [](const TargetDomain& t) { return std::string(group_name(t.group)); })
      .def_property_readonly("X", [](const TargetDomain& t) { return stack_rows(t.embeddings); })
      .def_property_readonly("X_test", [](const TargetDomain& t) { return rows_of(t.test); })
      .def_property_readonly("y_test", [](const TargetDomain& t) { return labels_of(t.test); })
      .def("__eq__", [](const TargetDomain& a, const TargetDomain& b) { return a == b; });

  m.def("scenario_names", &synthgen::scenario_names);
  m.def(
      "generate_scenario",
      [](const std::string& name, std::uint64_t seed) {
        const auto sc = synthgen::generate_scenario(synthgen::scenario_catalog(name, seed));
        py::dict d;
        d["sources"] = sc.sources;
        d["targets"] = sc.targets;
        d["ground_truth"] = sc.ground_truth;
        return d;
      },
      py::arg("name"), py::arg("seed") = 0);

  m.def(
      "load_dataset",
      [](const std::filesystem::path& p) -> py::object {
        auto d = io::load_dataset(p);
        if (auto* s = std::get_if<SourceDomain>(&d)) return py::cast(*s);
        return py::cast(std::get<TargetDomain>(d));
      },
      py::arg("path"));
  m.def("save_source", [](const std::filesystem::path& p, const SourceDomain& s) { io::save_dataset(p, s); },
        py::arg("path"), py::arg("domain"));
  m.def(
      "save_target",
      [](const std::filesystem::path& p, const TargetDomain& t, std::size_t k) { io::save_dataset(p, t, k); },
      py::arg("path"), py::arg("domain"), py::arg("num_classes"));

  m.def(
      "solve_exact",
      [](const MatrixXd& c, const VectorXd& a, const VectorXd& b) {
        return wasserstein_dict(ot::solve(ot::CostMatrix{c}, a, b, {ot::SolverMode::kExact}));
      },
      py::arg("cost"), py::arg("a"), py::arg("b"));
  m.def(
      "solve_sinkhorn",
      [](const MatrixXd& c, const VectorXd& a, const VectorXd& b, double epsilon, double tol, int max_iter) {
        ot::WassersteinOptions o;
        o.mode = ot::SolverMode::kEntropic;
        o.sinkhorn = {epsilon, tol, max_iter};
        return wasserstein_dict(ot::solve(ot::CostMatrix{c}, a, b, o));
      },
      py::arg("cost"), py::arg("a"), py::arg("b"), py::arg("epsilon") = 0.05, py::arg("tol") = 1e-6,
      py::arg("max_iter") = 10000);

  m.def(
      "train_si",
      [](const std::vector<SourceDomain>& sources, std::vector<std::size_t> hidden, std::size_t embedding_dim,
         int epochs, std::size_t batch_size, int patience, double learning_rate, std::uint64_t seed) {
        nn::SiConfig cfg;
        cfg.hidden = std::move(hidden);
        cfg.embedding_dim = embedding_dim;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.patience = patience;
        cfg.adam.learning_rate = learning_rate;
        cfg.seed = seed;
        py::gil_scoped_release release;
        auto model = nn::train_si(sources, cfg);
        return io::Checkpoint{std::move(model.extractor), std::move(model.classifier)};
      },
      py::arg("sources"), py::arg("hidden") = std::vector<std::size_t>{64, 64}, py::arg("embedding_dim") = 32,
      py::arg("epochs") = 200, py::arg("batch_size") = 32, py::arg("patience") = 20,
      py::arg("learning_rate") = 1e-3, py::arg("seed") = 0);

  m.def(
      "adapt",
      [](const io::Checkpoint& model, const std::vector<SourceDomain>& sources, const TargetDomain& target,
         const std::string& mode, double epsilon, int epochs, int f_steps, double alpha_step, double beta_g,
         double beta_y, double learning_rate, bool standardize) {
        if (!model.extractor) throw ConfigError("adaptation needs a model with an extractor");
        adaptation::AdaptConfig cfg;
        cfg.mode = parse_mode(mode);
        cfg.epsilon = epsilon;
        cfg.epochs = epochs;
        cfg.f_steps = f_steps;
        cfg.alpha_step = alpha_step;
        cfg.cost.beta_g = beta_g;
        cfg.cost.beta_y = beta_y;
        cfg.adam.learning_rate = learning_rate;
        cfg.standardize = standardize;
        TargetDomain blind = target;
        blind.test.clear();
        adaptation::AdaptResult r;
        {
          py::gil_scoped_release release;
          r = adaptation::adapt(sources, blind, *model.extractor, model.classifier, cfg);
        }
        return adapt_dict(r);
      },
      py::arg("model"), py::arg("sources"), py::arg("target"), py::arg("mode") = "entropic",
      py::arg("epsilon") = 0.05, py::arg("epochs") = 100, py::arg("f_steps") = 5, py::arg("alpha_step") = 1.0,
      py::arg("beta_g") = 1.0, py::arg("beta_y") = 1.0, py::arg("learning_rate") = 1e-3,
      py::arg("standardize") = true);

  m.def(
      "group_scores",
      [](const VectorXd& alpha, const std::vector<std::string>& groups) {
        std::vector<Group> g;
        for (const auto& s : groups) g.push_back(parse_group(s));
        const auto s = scoring::group_scores(SimplexWeights(alpha), g);
        return std::pair{s.hs, s.ds};
      },
      py::arg("alpha"), py::arg("groups"));
  m.def(
      "detect_group",
      [](double hs, double ds) { return std::string(group_name(scoring::detect_group({hs, ds}))); },
      py::arg("hs"), py::arg("ds"));
  m.def(
      "command_error_rate",
      [](const Labels& p, const Labels& r) { return scoring::command_error_rate(p, r); },
      py::arg("predictions"), py::arg("references"));
  m.def(
      "average_cer", [](const std::vector<double>& c) { return scoring::average_cer(c); }, py::arg("cers"));

  m.def(
      "run_experiment_json",
      [](const std::string& config, const std::filesystem::path& base_dir) {
        const auto cfg = experiment::config_from_json(config, base_dir);
        experiment::ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = experiment::run_experiment(cfg);
        }
        if (!cfg.output_dir.empty()) experiment::write_outputs(r, cfg.output_dir);
        return experiment::report_to_json(r.report);
      },
      py::arg("config"), py::arg("base_dir") = std::filesystem::path{},
      "Runs an experiment from a JSON config and returns the report as JSON text.");
}
