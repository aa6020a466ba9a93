// Python bindings for the occupancy core: survey-history construction,
// classifier metrics, likelihood/fitting, and the seeded simulation engine.
// Functions that accumulate warnings in C++ return them to Python as lists
// alongside their primary result where noted.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cooccur/common.hpp"
#include "cooccur/estimate.hpp"
#include "cooccur/io.hpp"
#include "cooccur/metrics.hpp"
#include "cooccur/model.hpp"
#include "cooccur/simulate.hpp"
#include "cooccur/survey.hpp"

namespace py = pybind11;
using namespace cooccur;

namespace {

std::optional<Eigen::MatrixXd> vcov_or_none(const FitResult& fit) {
  if (!fit.vcov_available) return std::nullopt;
  return fit.vcov;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multispecies occupancy modelling from camera-trap image labels";
  m.attr("DEFAULT_SEED") = kDefaultSeed;
  m.attr("MAX_SPECIES") = kMaxSpecies;

  py::class_<CivilDateTime>(m, "CivilDateTime")
      .def(py::init([](int year, int month, int day, int hour, int minute, int second) {
             return CivilDateTime{year, month, day, hour, minute, second};
           }),
           py::arg("year"), py::arg("month"), py::arg("day"), py::arg("hour") = 0,
           py::arg("minute") = 0, py::arg("second") = 0)
      .def_readwrite("year", &CivilDateTime::year)
      .def_readwrite("month", &CivilDateTime::month)
      .def_readwrite("day", &CivilDateTime::day)
      .def_readwrite("hour", &CivilDateTime::hour)
      .def_readwrite("minute", &CivilDateTime::minute)
      .def_readwrite("second", &CivilDateTime::second)
      .def("__repr__", [](const CivilDateTime& t) {
        return "CivilDateTime('" + format_datetime(t) + "')";
      });
  m.def("parse_datetime", [](const std::string& s) { return parse_datetime(s); }, py::arg("text"));
  m.def("format_datetime", &format_datetime, py::arg("timestamp"));
  m.def("parse_month", [](const std::string& s) { return parse_month(s); }, py::arg("text"));
  m.def("format_month", &format_month, py::arg("month"));

  py::class_<ImageRecord>(m, "ImageRecord")
      .def(py::init([](std::string site_id, const CivilDateTime& timestamp,
                       std::string label_true, std::optional<std::string> label_pred) {
             ImageRecord r;
             r.site_id = std::move(site_id);
             r.timestamp = timestamp;
             r.label_true = std::move(label_true);
             r.label_pred = std::move(label_pred);
             return r;
           }),
           py::arg("site_id"), py::arg("timestamp"), py::arg("label_true"),
           py::arg("label_pred") = std::nullopt)
      .def_readwrite("site_id", &ImageRecord::site_id)
      .def_readwrite("timestamp", &ImageRecord::timestamp)
      .def_readwrite("label_true", &ImageRecord::label_true)
      .def_readwrite("label_pred", &ImageRecord::label_pred);

  py::class_<DeploymentWindow>(m, "DeploymentWindow")
      .def(py::init([](std::string site_id, const CivilDateTime& start, const CivilDateTime& end) {
             return DeploymentWindow{std::move(site_id), start, end};
           }),
           py::arg("site_id"), py::arg("start"), py::arg("end"))
      .def_readwrite("site_id", &DeploymentWindow::site_id)
      .def_readwrite("start", &DeploymentWindow::start)
      .def_readwrite("end", &DeploymentWindow::end);

  py::enum_<LabelSource>(m, "LabelSource")
      .value("truth", LabelSource::truth)
      .value("predicted", LabelSource::predicted);

  py::class_<DetectionHistory>(m, "DetectionHistory")
      .def(py::init<>())
      .def_readwrite("species", &DetectionHistory::species)
      .def_readwrite("sites", &DetectionHistory::sites)
      .def_readwrite("occasions", &DetectionHistory::occasions)
      .def_property_readonly("n_species", &DetectionHistory::n_species)
      .def_property_readonly("n_sites", &DetectionHistory::n_sites)
      .def_property_readonly("n_occasions", &DetectionHistory::n_occasions)
      .def("cell",
           [](const DetectionHistory& h, int s, int i, int t) {
             return static_cast<int>(h.at(s, i, t));
           },
           py::arg("species"), py::arg("site"), py::arg("occasion"),
           "Cell value: 1 detection, 0 non-detection, -1 missing")
      .def("validate", &DetectionHistory::validate)
      .def("to_json", [](const DetectionHistory& h) { return history_to_json(h).dump(2); })
      .def_static("from_json",
                  [](const std::string& text) { return history_from_json(Json::parse(text)); },
                  py::arg("text"));

  m.def(
      "build_detection_history",
      [](const std::vector<ImageRecord>& records, const std::vector<DeploymentWindow>& deployments,
         const std::vector<SpeciesLabel>& species_filter, LabelSource label_source) {
        Warnings warnings;
        DetectionHistory h =
            build_detection_history(records, deployments, species_filter, label_source, &warnings);
        return std::make_pair(std::move(h), std::move(warnings));
      },
      py::arg("records"), py::arg("deployments") = std::vector<DeploymentWindow>{},
      py::arg("species_filter"), py::arg("label_source") = LabelSource::truth,
      "Returns (history, warnings)");

  py::class_<SpeciesSummaryRow>(m, "SpeciesSummaryRow")
      .def_readonly("species", &SpeciesSummaryRow::species)
      .def_readonly("n_detections", &SpeciesSummaryRow::n_detections)
      .def_readonly("n_active_cells", &SpeciesSummaryRow::n_active_cells)
      .def_readonly("n_sites_detected", &SpeciesSummaryRow::n_sites_detected)
      .def_readonly("naive_occupancy", &SpeciesSummaryRow::naive_occupancy);
  m.def("history_summary", &history_summary, py::arg("history"));

  py::class_<ConfusionMatrix>(m, "ConfusionMatrix")
      .def_readonly("labels", &ConfusionMatrix::labels)
      .def_readonly("counts", &ConfusionMatrix::counts)
      .def_property_readonly("total", &ConfusionMatrix::total);
  m.def("confusion_matrix", &confusion_matrix, py::arg("records"));

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("labels", &MetricsReport::labels)
      .def_readonly("precision", &MetricsReport::precision)
      .def_readonly("recall", &MetricsReport::recall)
      .def_readonly("support", &MetricsReport::support)
      .def_readonly("accuracy", &MetricsReport::accuracy);
  m.def("precision_recall", &precision_recall, py::arg("confusion"));

  py::class_<RowStochastic>(m, "RowStochastic")
      .def_readwrite("row_labels", &RowStochastic::row_labels)
      .def_readwrite("col_labels", &RowStochastic::col_labels)
      .def_readwrite("probs", &RowStochastic::probs)
      .def_static("identity", &RowStochastic::identity, py::arg("labels"));
  m.def(
      "row_normalize",
      [](const ConfusionMatrix& cm) {
        Warnings warnings;
        RowStochastic probs = row_normalize(cm, &warnings);
        return std::make_pair(std::move(probs), std::move(warnings));
      },
      py::arg("confusion"), "Returns (probs, warnings)");

  py::class_<OccupancyParams>(m, "OccupancyParams")
      .def_readonly("n_species", &OccupancyParams::n_species)
      .def_readonly("psi", &OccupancyParams::psi)
      .def_readonly("p", &OccupancyParams::p);
  m.def("make_params", &make_params, py::arg("psi"), py::arg("p"));
  m.def("state_label", &state_label, py::arg("state"), py::arg("n_species"));
  m.def("state_from_label", &state_from_label, py::arg("label"));
  m.def("theta_dim", &theta_dim, py::arg("n_species"));
  m.def("theta_to_params", &theta_to_params, py::arg("theta"), py::arg("n_species"));
  m.def("params_to_theta", &params_to_theta, py::arg("params"));

  m.def("neg_log_likelihood", &neg_log_likelihood, py::arg("params"), py::arg("history"),
        py::arg("threads") = 1);
  m.def(
      "nll_theta",
      [](const ThetaVector& theta, const DetectionHistory& h, int threads) {
        ThetaVector gradient;
        const double value = nll_theta(theta, h, &gradient, threads);
        return std::make_pair(value, std::move(gradient));
      },
      py::arg("theta"), py::arg("history"), py::arg("threads") = 1,
      "Returns (nll, gradient)");
  m.def("marginal_occupancy", &marginal_occupancy, py::arg("params"), py::arg("species"));
  m.def("conditional_occupancy", &conditional_occupancy, py::arg("params"), py::arg("target"),
        py::arg("given"), py::arg("given_present"));

  py::class_<FitOptions>(m, "FitOptions")
      .def(py::init<>())
      .def_readwrite("n_starts", &FitOptions::n_starts)
      .def_readwrite("seed", &FitOptions::seed)
      .def_readwrite("grad_tol", &FitOptions::grad_tol)
      .def_readwrite("max_iter", &FitOptions::max_iter)
      .def_readwrite("fd_hessian_step", &FitOptions::fd_hessian_step)
      .def_readwrite("threads", &FitOptions::threads);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("species", &FitResult::species)
      .def_readonly("theta_hat", &FitResult::theta_hat)
      .def_readonly("params_hat", &FitResult::params_hat)
      .def_readonly("nll", &FitResult::nll)
      .def_property_readonly("vcov", &vcov_or_none, "None when unavailable")
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("n_starts_converged", &FitResult::n_starts_converged)
      .def_readonly("boundary_warning", &FitResult::boundary_warning)
      .def_readonly("warnings", &FitResult::warnings)
      .def("to_json",
           [](const FitResult& fit, double level) { return fit_result_to_json(fit, level).dump(2); },
           py::arg("level") = 0.95);

  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
  m.def("fit", &fit, py::arg("history"), py::arg("options") = FitOptions{});

  py::class_<IntervalEstimate>(m, "IntervalEstimate")
      .def_readonly("point", &IntervalEstimate::point)
      .def_readonly("lower", &IntervalEstimate::lower)
      .def_readonly("upper", &IntervalEstimate::upper)
      .def_readonly("level", &IntervalEstimate::level);
  m.def("z_value", &z_value, py::arg("level"));
  m.def("wald_interval", &wald_interval, py::arg("fit"), py::arg("coordinate"),
        py::arg("level") = 0.95);

  py::class_<DerivedQuantity>(m, "DerivedQuantity")
      .def_static("marginal", &DerivedQuantity::marginal, py::arg("species"))
      .def_static("conditional", &DerivedQuantity::conditional, py::arg("target"),
                  py::arg("given"), py::arg("given_present"));
  m.def("derived_interval", &derived_interval, py::arg("fit"), py::arg("quantity"),
        py::arg("level") = 0.95);

  py::class_<EstimateRow>(m, "EstimateRow")
      .def_readonly("quantity", &EstimateRow::quantity)
      .def_readonly("point", &EstimateRow::point)
      .def_readonly("lower", &EstimateRow::lower)
      .def_readonly("upper", &EstimateRow::upper)
      .def_readonly("has_interval", &EstimateRow::has_interval);
  m.def("estimate_table", &estimate_table, py::arg("fit"), py::arg("level") = 0.95);

  py::class_<SimSpec>(m, "SimSpec")
      .def(py::init<>())
      .def_readwrite("params", &SimSpec::params)
      .def_readwrite("n_sites", &SimSpec::n_sites)
      .def_readwrite("n_occasions", &SimSpec::n_occasions)
      .def_readwrite("missing_rate", &SimSpec::missing_rate)
      .def_readwrite("seed", &SimSpec::seed)
      .def_readwrite("species", &SimSpec::species)
      .def_readwrite("start_month", &SimSpec::start_month);
  m.def("simulate_history", &simulate_history, py::arg("spec"), py::arg("threads") = 1);
  m.def("corrupt_labels", &corrupt_labels, py::arg("records"), py::arg("probs"), py::arg("seed"));
  m.def("records_from_history", &records_from_history, py::arg("history"),
        py::arg("images_per_detection"), py::arg("seed"));

  py::class_<DeltaRow>(m, "DeltaRow")
      .def_readonly("quantity", &DeltaRow::quantity)
      .def_readonly("truth", &DeltaRow::truth)
      .def_readonly("classified", &DeltaRow::classified)
      .def_readonly("delta", &DeltaRow::delta);

  py::class_<ExperimentReport>(m, "ExperimentReport")
      .def_readonly("fit_truth", &ExperimentReport::fit_truth)
      .def_readonly("fit_classified", &ExperimentReport::fit_classified)
      .def_readonly("deltas", &ExperimentReport::deltas)
      .def_readonly("confusion", &ExperimentReport::confusion)
      .def_readonly("metrics", &ExperimentReport::metrics)
      .def("to_json",
           [](const ExperimentReport& report, double level) {
             return experiment_to_json(report, level).dump(2);
           },
           py::arg("level") = 0.95);
  m.def(
      "run_experiment",
      [](const std::vector<ImageRecord>& records, const std::vector<DeploymentWindow>& deployments,
         const std::vector<SpeciesLabel>& species_filter, const RowStochastic& probs,
         const FitOptions& opts, std::uint64_t seed) {
        Warnings warnings;
        ExperimentReport report =
            run_experiment(records, deployments, species_filter, probs, opts, seed, &warnings);
        return std::make_pair(std::move(report), std::move(warnings));
      },
      py::arg("records"), py::arg("deployments") = std::vector<DeploymentWindow>{},
      py::arg("species_filter"), py::arg("probs"), py::arg("options") = FitOptions{},
      py::arg("seed") = kDefaultSeed, "Returns (report, warnings)");
}
