// Command-line front end: reproducible batch workflows over CSV/JSON files.
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure
// (no optimizer start converged). Warnings go to stderr and never change a
// success exit code. Every JSON output carries schema_version and the
// resolved run configuration; given the same configuration, re-runs are
// byte-identical (--threads only changes the execution schedule, never the
// numbers, so it is not part of the configuration).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cooccur/common.hpp"
#include "cooccur/estimate.hpp"
#include "cooccur/io.hpp"
#include "cooccur/metrics.hpp"
#include "cooccur/model.hpp"
#include "cooccur/rng.hpp"
#include "cooccur/simulate.hpp"
#include "cooccur/survey.hpp"

namespace {

namespace fs = std::filesystem;
using cooccur::Json;

struct Options {
  std::string images;
  std::string deployments;
  std::string history;
  std::string params;
  std::string probs;
  std::string fit_file;
  std::vector<std::string> species;
  std::string label_source = "true";
  std::string out = ".";
  std::uint64_t seed = cooccur::kDefaultSeed;
  int starts = 5;
  int max_iter = 500;
  double level = 0.95;
  int threads = 1;
  int sites = 100;
  int occasions = 12;
  double missing_rate = 0.0;
  double images_per_detection = 1.0;
};

void print_warnings(const cooccur::Warnings& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
}

fs::path ensure_out_dir(const std::string& out) {
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_doc(const fs::path& file, Json config, const char* payload_key, Json payload) {
  Json doc;
  doc["schema_version"] = 1;
  doc["config"] = std::move(config);
  doc[payload_key] = std::move(payload);
  cooccur::write_json_file(file.string(), doc);
}

std::string format_double(double value) { return Json(value).dump(); }

cooccur::LabelSource parse_label_source(const std::string& name) {
  return name == "predicted" ? cooccur::LabelSource::predicted : cooccur::LabelSource::truth;
}

std::vector<cooccur::DeploymentWindow> load_deployments(const std::string& path) {
  if (path.empty()) return {};
  return cooccur::read_deployments_csv(path);
}

/// Accepts both a bare payload and a CLI-written document wrapping it.
const Json& unwrap(const Json& doc, const char* payload_key) {
  if (doc.is_object() && doc.contains(payload_key)) return doc.at(payload_key);
  return doc;
}

cooccur::FitOptions fit_options(const Options& o) {
  cooccur::FitOptions opts;
  opts.n_starts = o.starts;
  opts.seed = o.seed;
  opts.max_iter = o.max_iter;
  opts.threads = o.threads;
  return opts;
}

Json fit_config_fields(const Options& o) {
  Json config;
  config["seed"] = o.seed;
  config["starts"] = o.starts;
  config["max_iter"] = o.max_iter;
  config["level"] = o.level;
  return config;
}

cooccur::DetectionHistory load_history_input(const Options& o, cooccur::Warnings* warnings) {
  if (!o.history.empty() && !o.images.empty()) {
    throw std::invalid_argument("pass either --history or --images, not both");
  }
  if (!o.history.empty()) {
    return cooccur::history_from_json(unwrap(cooccur::read_json_file(o.history), "history"));
  }
  if (o.images.empty()) {
    throw std::invalid_argument("one of --history or --images is required");
  }
  if (o.species.empty()) {
    throw std::invalid_argument("--species is required when building from images");
  }
  return cooccur::build_detection_history(cooccur::read_images_csv(o.images),
                                          load_deployments(o.deployments), o.species,
                                          parse_label_source(o.label_source), warnings);
}

void write_summary_csv(const fs::path& file,
                       const std::vector<cooccur::SpeciesSummaryRow>& rows) {
  std::ostringstream out;
  out << "species,n_detections,n_active_cells,n_sites_detected,naive_occupancy\n";
  for (const cooccur::SpeciesSummaryRow& row : rows) {
    out << row.species << ',' << row.n_detections << ',' << row.n_active_cells << ','
        << row.n_sites_detected << ',' << format_double(row.naive_occupancy) << '\n';
  }
  cooccur::write_text_file(file.string(), out.str());
}

// Effort windows implied by a history: one row per run of consecutive
// surveyed months per site. Windows end on day 28, the last day emitted image
// timestamps can fall on, so re-ingesting the matching images.csv with these
// deployments reproduces the history exactly and without warnings.
void write_deployments_csv(const fs::path& file, const cooccur::DetectionHistory& h) {
  std::ostringstream out;
  out << "site_id,start,end\n";
  for (int i = 0; i < h.n_sites(); ++i) {
    int t = 0;
    while (t < h.n_occasions()) {
      if (h.at(0, i, t) == cooccur::Cell::missing) {
        ++t;
        continue;
      }
      const int first = t;
      while (t < h.n_occasions() && h.at(0, i, t) != cooccur::Cell::missing) ++t;
      out << h.sites[static_cast<std::size_t>(i)] << ','
          << cooccur::format_month(h.occasions[static_cast<std::size_t>(first)]) << "-01,"
          << cooccur::format_month(h.occasions[static_cast<std::size_t>(t - 1)]) << "-28\n";
    }
  }
  cooccur::write_text_file(file.string(), out.str());
}

void run_ingest(const Options& o) {
  Json config;
  config["subcommand"] = "ingest";
  config["images"] = o.images;
  config["deployments"] = o.deployments.empty() ? Json(nullptr) : Json(o.deployments);
  config["species"] = o.species;
  config["label_source"] = o.label_source;
  config["out"] = o.out;

  cooccur::Warnings warnings;
  const cooccur::DetectionHistory h = cooccur::build_detection_history(
      cooccur::read_images_csv(o.images), load_deployments(o.deployments), o.species,
      parse_label_source(o.label_source), &warnings);

  const fs::path dir = ensure_out_dir(o.out);
  write_doc(dir / "history.json", std::move(config), "history", cooccur::history_to_json(h));
  write_summary_csv(dir / "summary.csv", cooccur::history_summary(h));
  print_warnings(warnings);
}

void run_metrics(const Options& o) {
  Json config;
  config["subcommand"] = "metrics";
  config["images"] = o.images;
  config["out"] = o.out;

  const cooccur::ConfusionMatrix cm =
      cooccur::confusion_matrix(cooccur::read_images_csv(o.images));
  const cooccur::MetricsReport report = cooccur::precision_recall(cm);

  const fs::path dir = ensure_out_dir(o.out);
  write_doc(dir / "metrics.json", std::move(config), "metrics", cooccur::metrics_to_json(report));
  cooccur::write_confusion_csv((dir / "confusion.csv").string(), cm);
}

void run_fit(const Options& o) {
  Json config;
  config["subcommand"] = "fit";
  config["history"] = o.history.empty() ? Json(nullptr) : Json(o.history);
  config["images"] = o.images.empty() ? Json(nullptr) : Json(o.images);
  config["deployments"] = o.deployments.empty() ? Json(nullptr) : Json(o.deployments);
  config["species"] = o.species;
  config["label_source"] = o.label_source;
  config.update(fit_config_fields(o));
  config["out"] = o.out;

  cooccur::Warnings warnings;
  const cooccur::DetectionHistory h = load_history_input(o, &warnings);
  const cooccur::FitResult result = cooccur::fit(h, fit_options(o));

  const fs::path dir = ensure_out_dir(o.out);
  write_doc(dir / "fit-result.json", std::move(config), "fit",
            cooccur::fit_result_to_json(result, o.level));
  cooccur::write_estimates_csv((dir / "estimates.csv").string(),
                               cooccur::estimate_table(result, o.level), o.level);
  print_warnings(warnings);
  print_warnings(result.warnings);
}

void run_derive(const Options& o) {
  Json config;
  config["subcommand"] = "derive";
  config["fit"] = o.fit_file;
  config["level"] = o.level;
  config["out"] = o.out;

  const cooccur::FitResult result =
      cooccur::fit_result_from_json(unwrap(cooccur::read_json_file(o.fit_file), "fit"));
  const std::vector<cooccur::EstimateRow> rows = cooccur::estimate_table(result, o.level);

  const fs::path dir = ensure_out_dir(o.out);
  write_doc(dir / "derived.json", std::move(config), "estimates",
            cooccur::estimates_to_json(rows, o.level));
  cooccur::write_estimates_csv((dir / "estimates.csv").string(), rows, o.level);
  print_warnings(result.warnings);
}

void run_simulate(const Options& o) {
  Json config;
  config["subcommand"] = "simulate";
  config["params"] = o.params;
  config["sites"] = o.sites;
  config["occasions"] = o.occasions;
  config["missing_rate"] = o.missing_rate;
  config["images_per_detection"] = o.images_per_detection;
  config["seed"] = o.seed;
  config["out"] = o.out;

  auto [params, species] =
      cooccur::params_from_json(unwrap(cooccur::read_json_file(o.params), "params"));
  cooccur::SimSpec spec;
  spec.params = std::move(params);
  spec.species = std::move(species);
  spec.n_sites = o.sites;
  spec.n_occasions = o.occasions;
  spec.missing_rate = o.missing_rate;
  spec.seed = o.seed;
  const cooccur::DetectionHistory h = cooccur::simulate_history(spec, o.threads);
  // Record expansion runs on its own sub-stream so it cannot overlap the
  // per-site simulation streams.
  const std::vector<cooccur::ImageRecord> records = cooccur::records_from_history(
      h, o.images_per_detection, cooccur::Rng::substream(o.seed, 1));

  const fs::path dir = ensure_out_dir(o.out);
  write_doc(dir / "history.json", std::move(config), "history", cooccur::history_to_json(h));
  cooccur::write_images_csv((dir / "images.csv").string(), records);
  write_deployments_csv(dir / "deployments.csv", h);
}

void run_corrupt(const Options& o) {
  cooccur::Warnings warnings;
  const cooccur::RowStochastic probs = cooccur::read_probs_csv(o.probs, &warnings);
  const std::vector<cooccur::ImageRecord> corrupted =
      cooccur::corrupt_labels(cooccur::read_images_csv(o.images), probs, o.seed);

  const fs::path dir = ensure_out_dir(o.out);
  cooccur::write_images_csv((dir / "corrupted.csv").string(), corrupted);
  print_warnings(warnings);
}

void run_experiment(const Options& o) {
  Json config;
  config["subcommand"] = "experiment";
  config["images"] = o.images;
  config["deployments"] = o.deployments.empty() ? Json(nullptr) : Json(o.deployments);
  config["species"] = o.species;
  config["probs"] = o.probs;
  config.update(fit_config_fields(o));
  config["out"] = o.out;

  cooccur::Warnings warnings;
  const cooccur::RowStochastic probs = cooccur::read_probs_csv(o.probs, &warnings);
  const cooccur::ExperimentReport report = cooccur::run_experiment(
      cooccur::read_images_csv(o.images), load_deployments(o.deployments), o.species, probs,
      fit_options(o), o.seed, &warnings);

  const fs::path dir = ensure_out_dir(o.out);
  write_doc(dir / "experiment.json", std::move(config), "experiment",
            cooccur::experiment_to_json(report, o.level));
  cooccur::write_experiment_csv((dir / "experiment.csv").string(), report, o.level);
  print_warnings(warnings);
  print_warnings(report.fit_truth.warnings);
  print_warnings(report.fit_classified.warnings);
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Multispecies occupancy workflows over camera-trap image labels"};
  app.require_subcommand(1);

  const auto add_out = [&o](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory (created if needed)")
        ->capture_default_str();
  };
  const auto add_seed = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  };
  const auto add_threads = [&o](CLI::App* sub) {
    sub->add_option("--threads", o.threads, "Worker threads (never changes results)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  };
  const auto add_fit_flags = [&o, &add_seed, &add_threads](CLI::App* sub) {
    add_seed(sub);
    sub->add_option("--starts", o.starts, "Random optimizer starts")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--max-iter", o.max_iter, "BFGS iteration cap per start")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--level", o.level, "Confidence level for intervals")
        ->capture_default_str();
    add_threads(sub);
  };
  const auto add_species = [&o](CLI::App* sub, bool required) {
    CLI::Option* opt =
        sub->add_option("--species", o.species, "Comma-separated species labels to model")
            ->delimiter(',');
    if (required) opt->required();
  };
  const auto add_label_source = [&o](CLI::App* sub) {
    sub->add_option("--label-source", o.label_source,
                    "Which labels fill the history: true or predicted")
        ->check(CLI::IsMember({"true", "predicted"}))
        ->capture_default_str();
  };

  CLI::App* ingest =
      app.add_subcommand("ingest", "Build a monthly detection history from labelled images");
  ingest->add_option("--images", o.images, "images.csv")->required();
  ingest->add_option("--deployments", o.deployments, "deployments.csv");
  add_species(ingest, true);
  add_label_source(ingest);
  add_out(ingest);
  ingest->callback([&o] { run_ingest(o); });

  CLI::App* metrics =
      app.add_subcommand("metrics", "Confusion matrix and per-class precision/recall");
  metrics->add_option("--images", o.images, "images.csv with predicted labels")->required();
  add_out(metrics);
  metrics->callback([&o] { run_metrics(o); });

  CLI::App* fit = app.add_subcommand("fit", "Fit the multispecies occupancy model");
  fit->add_option("--history", o.history, "history.json from ingest or simulate");
  fit->add_option("--images", o.images, "images.csv (alternative to --history)");
  fit->add_option("--deployments", o.deployments, "deployments.csv");
  add_species(fit, false);
  add_label_source(fit);
  add_fit_flags(fit);
  add_out(fit);
  fit->callback([&o] { run_fit(o); });

  CLI::App* derive =
      app.add_subcommand("derive", "Recompute estimates and intervals from a saved fit");
  derive->add_option("--fit", o.fit_file, "fit-result.json")->required();
  derive->add_option("--level", o.level, "Confidence level for intervals")
      ->capture_default_str();
  add_out(derive);
  derive->callback([&o] { run_derive(o); });

  CLI::App* simulate =
      app.add_subcommand("simulate", "Simulate a detection history and matching image records");
  simulate->add_option("--params", o.params, "params.json (species, psi, p)")->required();
  simulate->add_option("--sites", o.sites, "Number of sites")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--occasions", o.occasions, "Number of monthly occasions")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--missing-rate", o.missing_rate, "Site-occasion missingness probability")
      ->capture_default_str();
  simulate
      ->add_option("--images-per-detection", o.images_per_detection,
                   "Mean records per detection cell (>= 1)")
      ->capture_default_str();
  add_seed(simulate);
  add_threads(simulate);
  add_out(simulate);
  simulate->callback([&o] { run_simulate(o); });

  CLI::App* corrupt =
      app.add_subcommand("corrupt", "Replace predicted labels by sampling a confusion matrix");
  corrupt->add_option("--images", o.images, "images.csv")->required();
  corrupt->add_option("--probs", o.probs, "Label-indexed matrix CSV (counts or probabilities)")
      ->required();
  add_seed(corrupt);
  add_out(corrupt);
  corrupt->callback([&o] { run_corrupt(o); });

  CLI::App* experiment = app.add_subcommand(
      "experiment", "Fit ground-truth vs corrupted labels and report the differences");
  experiment->add_option("--images", o.images, "images.csv with true labels")->required();
  experiment->add_option("--deployments", o.deployments, "deployments.csv");
  add_species(experiment, true);
  experiment->add_option("--probs", o.probs, "Corruption matrix CSV")->required();
  add_fit_flags(experiment);
  add_out(experiment);
  experiment->callback([&o] { run_experiment(o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const cooccur::FitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
