#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cooccur/common.hpp"
#include "cooccur/estimate.hpp"
#include "cooccur/metrics.hpp"
#include "cooccur/model.hpp"
#include "cooccur/simulate.hpp"
#include "cooccur/survey.hpp"

namespace cooccur {

/// JSON type used for all serialized output: key order is insertion order,
/// so re-runs emit byte-identical files.
using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV
//
// Fields are separator-free by the domain invariants (labels and site ids
// carry no commas; timestamps are ISO-8601), so rows are split on plain
// commas with no quoting layer. Lines may end in CRLF. Errors identify the
// file and 1-based row.

/// Reads `site_id,timestamp,label_true,label_pred`; an empty label_pred
/// column yields an absent prediction.
std::vector<ImageRecord> read_images_csv(const std::string& path);
void write_images_csv(const std::string& path, const std::vector<ImageRecord>& records);

/// Reads `site_id,start,end` with ISO dates, start <= end.
std::vector<DeploymentWindow> read_deployments_csv(const std::string& path);

/// Square label-indexed count matrix: header `label,<col labels...>`, one
/// row per true label.
void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm);
ConfusionMatrix read_confusion_csv(const std::string& path);

/// Reads a label-indexed real matrix in the confusion.csv layout and
/// row-normalizes it, so the file may hold either raw counts or
/// probabilities. All-zero rows are dropped with a warning; a matrix with no
/// mass at all is an error.
RowStochastic read_probs_csv(const std::string& path, Warnings* warnings = nullptr);

// ---------------------------------------------------------------------------
// JSON payloads (document envelopes are added by the CLI layer)

Json history_to_json(const DetectionHistory& h);
DetectionHistory history_from_json(const Json& j);

/// {"species": [...], "psi": {state label: prob}, "p": {species: prob}}.
/// Reading also accepts plain arrays for psi (state-index order) and p
/// (species order).
Json params_to_json(const OccupancyParams& params, const std::vector<SpeciesLabel>& species);
std::pair<OccupancyParams, std::vector<SpeciesLabel>> params_from_json(const Json& j);

Json confusion_to_json(const ConfusionMatrix& cm);
Json metrics_to_json(const MetricsReport& report);
Json estimates_to_json(const std::vector<EstimateRow>& rows, double level);

/// Full fit payload: theta, params keyed by state/species labels, nll,
/// row-major vcov (null when unavailable), convergence flags, warnings, and
/// the estimate table with intervals at the given level.
Json fit_result_to_json(const FitResult& fit, double level);
/// Inverse of fit_result_to_json (the serialized estimate table is ignored;
/// it is recomputed from the parameters on demand).
FitResult fit_result_from_json(const Json& j);

Json experiment_to_json(const ExperimentReport& report, double level);

// ---------------------------------------------------------------------------
// Plot-ready CSVs

/// `quantity,point,lower,upper,level` (interval cells empty when no vcov).
void write_estimates_csv(const std::string& path, const std::vector<EstimateRow>& rows,
                         double level);

/// Same columns plus a leading `dataset` column (truth / classified) --- the
/// data behind side-by-side estimate figures.
void write_experiment_csv(const std::string& path, const ExperimentReport& report, double level);

// ---------------------------------------------------------------------------
// Files

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
Json read_json_file(const std::string& path);
/// Two-space indent plus trailing newline; the only JSON writer used, so
/// formatting is uniform everywhere.
void write_json_file(const std::string& path, const Json& j);

}  // namespace cooccur
