#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cooccur/common.hpp"
#include "cooccur/estimate.hpp"
#include "cooccur/metrics.hpp"
#include "cooccur/model.hpp"
#include "cooccur/survey.hpp"

namespace cooccur {

/// Generative specification for a synthetic detection history.
struct SimSpec {
  OccupancyParams params;
  int n_sites = 0;
  int n_occasions = 0;
  double missing_rate = 0.0;  // site-occasion i.i.d. MISSING probability, in [0, 1)
  std::uint64_t seed = kDefaultSeed;

  /// Optional registries; defaults are generated ("sp1".., "site_0001"..,
  /// months from 2017-01).
  std::vector<SpeciesLabel> species;
  MonthIndex start_month = month_of(CivilDateTime{2017, 1});

  void validate() const;
};

/// Draws one latent state per site from psi, then Bernoulli detections per
/// species-occasion, then site-occasion missingness. Each site consumes its
/// own sub-stream (substream(seed, site index)), so results are identical
/// whether sites are generated serially or in parallel.
DetectionHistory simulate_history(const SimSpec& spec, int threads = 1);

/// Fills label_pred for every record by sampling from the row of probs that
/// matches label_true. Record count, order, and all other fields are
/// preserved. Sequential draws from a single stream seeded by `seed`.
std::vector<ImageRecord> corrupt_labels(std::vector<ImageRecord> records,
                                        const RowStochastic& probs, std::uint64_t seed);

/// Expands a detection history back into image records: every detection cell
/// yields 1 + Poisson(mean − 1) records with label_true = species and
/// timestamps inside the occasion month. Non-detection and MISSING cells
/// yield none. One sub-stream per (species, site, occasion) cell.
std::vector<ImageRecord> records_from_history(const DetectionHistory& h,
                                              double images_per_detection, std::uint64_t seed);

/// One quantity compared between the ground-truth fit and the classified fit.
struct DeltaRow {
  std::string quantity;  // matches EstimateRow naming
  double truth = 0.0;
  double classified = 0.0;
  double delta = 0.0;  // |truth - classified|
};

struct ExperimentReport {
  FitResult fit_truth;
  FitResult fit_classified;
  std::vector<DeltaRow> deltas;
  ConfusionMatrix confusion;  // realized corruption, label_true vs label_pred
  MetricsReport metrics;
};

/// Ground-truth-vs-classified comparison: corrupts the records' labels
/// through probs (corruption stream = substream(seed, 1)), builds one history
/// from true labels and one from predicted labels, fits both with identical
/// options, and tabulates per-quantity absolute differences alongside the
/// realized confusion metrics.
ExperimentReport run_experiment(const std::vector<ImageRecord>& records,
                                const std::vector<DeploymentWindow>& deployments,
                                const std::vector<SpeciesLabel>& species_filter,
                                const RowStochastic& probs, const FitOptions& opts,
                                std::uint64_t seed, Warnings* warnings = nullptr);

}  // namespace cooccur
