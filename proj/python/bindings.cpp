#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "distillnn/commands.hpp"
#include "distillnn/errors.hpp"
#include "distillnn/metrics.hpp"
#include "distillnn/persistence.hpp"

namespace py = pybind11;
using namespace distillnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

Tensor to_matrix(const Array& a, const char* what) {
  if (a.ndim() == 1) return Tensor::matrix(static_cast<std::size_t>(a.shape(0)), 1, to_vector(a));
  if (a.ndim() != 2) throw ContractError(std::string(what) + " must be 1-D or 2-D");
  return Tensor::matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), to_vector(a));
}

Array to_array(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  return to_array(t.values(), shape);
}

/// Stacks per-sample (N, D) tensors into (T, N, D).
Array stack(const std::vector<Tensor>& ts) {
  if (ts.empty()) return Array(std::vector<py::ssize_t>{0, 0, 0});
  const auto n = static_cast<py::ssize_t>(ts.front().rows()), d = static_cast<py::ssize_t>(ts.front().cols());
  Array out({static_cast<py::ssize_t>(ts.size()), n, d});
  double* p = out.mutable_data();
  for (const Tensor& t : ts) p = std::copy(t.values().begin(), t.values().end(), p);
  return out;
}

using Path = std::optional<std::filesystem::path>;

CommandOptions options(Path config, std::optional<std::uint64_t> seed, Path out, Path teacher, Path student,
                       std::optional<std::string> mode) {
  CommandOptions o;
  o.config = std::move(config);
  o.seed = seed;
  o.out = std::move(out);
  o.teacher = std::move(teacher);
  o.student = std::move(student);
  if (mode) o.mode = parse_student_mode(*mode);
  return o;
}

int run(int (*command)(const CommandOptions&), const CommandOptions& o) {
  py::gil_scoped_release release;
  return command(o);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "distillnn core bindings";
  m.attr("__version__") = library_version();

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  static PyObject* numeric = py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError).ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ScheduleExhaustedError& e) {
      PyErr_SetString(numeric, e.what());
    }
  });

  // Commands. Each returns the exit code (0, or 4 for a partial sweep) and raises on errors.
  m.def(
      "train_teacher",
      [](Path config, std::optional<std::uint64_t> seed, Path out) {
        return run(cmd_train_teacher, options(config, seed, out, {}, {}, {}));
      },
      py::kw_only(), py::arg("config") = py::none(), py::arg("seed") = py::none(), py::arg("out") = py::none());
  m.def(
      "distill",
      [](Path config, std::optional<std::uint64_t> seed, Path out, std::filesystem::path teacher,
         std::optional<std::string> mode) {
        return run(cmd_distill, options(config, seed, out, teacher, {}, mode));
      },
      py::kw_only(), py::arg("config") = py::none(), py::arg("seed") = py::none(), py::arg("out") = py::none(),
      py::arg("teacher"), py::arg("mode") = py::none());
  m.def(
      "evaluate",
      [](Path config, std::optional<std::uint64_t> seed, Path out, Path teacher, Path student) {
        return run(cmd_evaluate, options(config, seed, out, teacher, student, {}));
      },
      py::kw_only(), py::arg("config") = py::none(), py::arg("seed") = py::none(), py::arg("out") = py::none(),
      py::arg("teacher") = py::none(), py::arg("student") = py::none());
  m.def(
      "ablate",
      [](const std::string& kind, Path config, std::optional<std::uint64_t> seed, Path out, Path teacher) {
        CommandOptions o = options(config, seed, out, teacher, {}, {});
        o.ablation = parse_ablation_kind(kind);
        return run(cmd_ablate, o);
      },
      py::arg("kind"), py::kw_only(), py::arg("config") = py::none(), py::arg("seed") = py::none(),
      py::arg("out") = py::none(), py::arg("teacher") = py::none());
  m.def(
      "outlier_eval",
      [](Path config, std::optional<std::uint64_t> seed, Path out, std::filesystem::path teacher,
         std::filesystem::path student, Path reference) {
        CommandOptions o = options(config, seed, out, teacher, student, {});
        o.reference = reference;
        return run(cmd_outlier_eval, o);
      },
      py::kw_only(), py::arg("config") = py::none(), py::arg("seed") = py::none(), py::arg("out") = py::none(),
      py::arg("teacher"), py::arg("student"), py::arg("reference") = py::none());
  m.def("print_defaults", [] {
    std::ostringstream s;
    cmd_print_defaults(s);
    return s.str();
  });

  // Checkpoints.
  m.def(
      "teacher_predict",
      [](const std::filesystem::path& path, const Array& x, std::optional<std::size_t> samples, std::uint64_t seed) {
        const TeacherModel t = load_teacher(path);
        Rng rng(seed);
        const BatchSamples b = samples ? mc_predict(t, to_matrix(x, "x"), *samples, rng) : mc_predict(t, to_matrix(x, "x"), rng);
        py::dict out;
        out["mu"] = stack(b.mu);
        out["logvar"] = b.has_logvar() ? py::object(stack(b.logvar)) : py::none();
        return out;
      },
      py::arg("path"), py::arg("x"), py::arg("samples") = py::none(), py::arg("seed") = 0,
      "Predictive samples (T, N, D) for mu and, with a head, log variance.");
  m.def(
      "student_predict",
      [](const std::filesystem::path& path, const Array& x) {
        const StudentModel s = load_student(path);
        const DistParams p = student_predict(s, to_matrix(x, "x"));
        return py::make_tuple(to_array(p.mu), to_array(p.logvar));
      },
      py::arg("path"), py::arg("x"), "Returns (mu, logvar), each (N, D).");

  // Data.
  m.def(
      "gen_regression",
      [](long n, const std::string& split, std::uint64_t seed, bool noise_free) {
        const RegressionDataset d = gen_regression(n, {parse_split(split), {}, seed}, noise_free);
        const auto len = static_cast<py::ssize_t>(d.size());
        py::dict out;
        out["x"] = to_array(d.x, {len});
        out["y"] = to_array(d.y, {len});
        out["true_sigma"] = to_array(d.true_sigma, {len});
        return out;
      },
      py::arg("n"), py::arg("split") = "train", py::arg("seed") = 0, py::arg("noise_free") = false);
  m.def(
      "gen_classification",
      [](long n, int num_classes, const std::string& split, std::set<int> held_out, std::uint64_t seed) {
        const ClassificationDataset d = gen_classification(n, num_classes, {parse_split(split), held_out, seed});
        std::vector<double> flat;
        for (const auto& p : d.x) flat.insert(flat.end(), p.begin(), p.end());
        py::dict out;
        out["x"] = to_array(flat, {static_cast<py::ssize_t>(d.size()), 2});
        out["labels"] = py::array_t<int>(static_cast<py::ssize_t>(d.labels.size()), d.labels.data());
        return out;
      },
      py::arg("n"), py::arg("num_classes") = 4, py::arg("split") = "train", py::arg("held_out") = std::set<int>{},
      py::arg("seed") = 0);

  // Metrics.
  m.def(
      "epistemic_variance",
      [](const Array& mu) {
        const auto v = epistemic_variance({to_matrix(mu, "mu"), {}});
        return to_array(v, {static_cast<py::ssize_t>(v.size())});
      },
      py::arg("mu"), "Variance over samples of a (T, D) array of means.");
  m.def(
      "total_variance",
      [](const Array& mu, const Array& logvar) {
        const auto v = total_variance({to_matrix(mu, "mu"), to_matrix(logvar, "logvar")});
        return to_array(v, {static_cast<py::ssize_t>(v.size())});
      },
      py::arg("mu"), py::arg("logvar"));
  m.def(
      "bald", [](const Array& probs) { return bald(to_matrix(probs, "probs")); }, py::arg("probs"),
      "Mutual information in nats from (T, K) class probabilities.");
  m.def(
      "ause", [](const Array& errors, const Array& unc) { return ause(to_vector(errors), to_vector(unc)).value; },
      py::arg("errors"), py::arg("uncertainties"));
  m.def(
      "ece_classification",
      [](const Array& confidences, const std::vector<bool>& correct) {
        return ece_classification(to_vector(confidences), correct);
      },
      py::arg("confidences"), py::arg("correct"));
  m.def(
      "ece_regression", [](const Array& cdf) { return ece_regression(to_vector(cdf)); }, py::arg("cdf_values"));
  m.def(
      "js_distance",
      [](const Array& a, const Array& b, std::size_t bins) { return js_distance(to_vector(a), to_vector(b), bins); },
      py::arg("a"), py::arg("b"), py::arg("bins") = 50, "Jensen-Shannon distance in bits.");
}
