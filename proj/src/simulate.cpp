#include "cooccur/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "cooccur/parallel.hpp"
#include "cooccur/rng.hpp"

namespace cooccur {

namespace {

std::string padded_site_id(int index, int width) {
  std::string digits = std::to_string(index + 1);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  }
  return "site_" + digits;
}

}  // namespace

void SimSpec::validate() const {
  make_params(params.psi, params.p);  // throws on malformed parameters
  if (n_sites < 1) throw std::invalid_argument("n_sites must be at least 1");
  if (n_occasions < 1) throw std::invalid_argument("n_occasions must be at least 1");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw std::invalid_argument("missing_rate must lie in [0, 1)");
  }
  if (!species.empty()) {
    if (static_cast<int>(species.size()) != params.n_species) {
      throw std::invalid_argument("species labels do not match the parameter dimension");
    }
    std::set<SpeciesLabel> unique(species.begin(), species.end());
    if (unique.size() != species.size()) {
      throw std::invalid_argument("species labels must be unique");
    }
  }
}

DetectionHistory simulate_history(const SimSpec& spec, int threads) {
  spec.validate();
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  const int S = spec.params.n_species;
  const int I = spec.n_sites;
  const int T = spec.n_occasions;

  DetectionHistory h;
  h.species = spec.species;
  if (h.species.empty()) {
    for (int s = 0; s < S; ++s) h.species.push_back("sp" + std::to_string(s + 1));
  }
  const int width = static_cast<int>(std::to_string(I).size());
  h.sites.reserve(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) h.sites.push_back(padded_site_id(i, width));
  h.occasions.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) h.occasions.push_back(spec.start_month + t);
  h.y.assign(static_cast<std::size_t>(S) * I * T, Cell::no_detection);

  // Fixed per-site draw order: latent state, then detections occasion by
  // occasion (skipping absent species), then one missingness draw per
  // occasion when missing_rate > 0. Each site has its own sub-stream, so the
  // block partition below cannot change the output.
  parallel_blocks(static_cast<std::size_t>(I), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t site = begin; site < end; ++site) {
      const int i = static_cast<int>(site);
      Rng rng(Rng::substream(spec.seed, site));
      const int z = rng.categorical(spec.params.psi);
      for (int t = 0; t < T; ++t) {
        for (int s = 0; s < S; ++s) {
          if (((z >> s) & 1) != 0 && rng.bernoulli(spec.params.p[s])) {
            h.at(s, i, t) = Cell::detection;
          }
        }
      }
      if (spec.missing_rate > 0.0) {
        for (int t = 0; t < T; ++t) {
          if (rng.bernoulli(spec.missing_rate)) {
            for (int s = 0; s < S; ++s) h.at(s, i, t) = Cell::missing;
          }
        }
      }
    }
  });
  return h;
}

std::vector<ImageRecord> corrupt_labels(std::vector<ImageRecord> records,
                                        const RowStochastic& probs, std::uint64_t seed) {
  probs.validate();
  std::unordered_map<std::string, int> row_of;
  for (std::size_t r = 0; r < probs.row_labels.size(); ++r) {
    row_of.emplace(probs.row_labels[r], static_cast<int>(r));
  }
  Rng rng(seed);
  for (ImageRecord& record : records) {
    const auto it = row_of.find(record.label_true);
    if (it == row_of.end()) {
      throw std::invalid_argument("no corruption probabilities for label '" + record.label_true +
                                  "'");
    }
    const int column = rng.categorical(probs.probs.row(it->second).transpose());
    record.label_pred = probs.col_labels[static_cast<std::size_t>(column)];
  }
  return records;
}

std::vector<ImageRecord> records_from_history(const DetectionHistory& h,
                                              double images_per_detection, std::uint64_t seed) {
  h.validate();
  if (!(images_per_detection >= 1.0)) {
    throw std::invalid_argument("images_per_detection must be at least 1");
  }
  std::vector<ImageRecord> records;
  for (int s = 0; s < h.n_species(); ++s) {
    for (int i = 0; i < h.n_sites(); ++i) {
      for (int t = 0; t < h.n_occasions(); ++t) {
        if (h.at(s, i, t) != Cell::detection) continue;
        // One sub-stream per cell, keyed by its row-major index, so the
        // expansion of any one cell is independent of every other.
        Rng rng(Rng::substream(seed, h.index(s, i, t)));
        const int count = 1 + rng.poisson(images_per_detection - 1.0);
        const MonthIndex m = h.occasions[static_cast<std::size_t>(t)];
        for (int k = 0; k < count; ++k) {
          ImageRecord record;
          record.site_id = h.sites[static_cast<std::size_t>(i)];
          record.label_true = h.species[static_cast<std::size_t>(s)];
          record.timestamp.year = m / 12;
          record.timestamp.month = m % 12 + 1;
          // Day capped at 28 so the draw is valid in every month.
          record.timestamp.day = 1 + static_cast<int>(rng.uniform() * 28.0);
          record.timestamp.hour = static_cast<int>(rng.uniform() * 24.0);
          record.timestamp.minute = static_cast<int>(rng.uniform() * 60.0);
          record.timestamp.second = static_cast<int>(rng.uniform() * 60.0);
          records.push_back(std::move(record));
        }
      }
    }
  }
  return records;
}

namespace {

struct PointRow {
  std::string quantity;
  double value;
};

// Point estimates under the same quantity names as estimate_table, without
// requiring vcov. Conditionals whose conditioning event has probability zero
// at the estimate are skipped.
std::vector<PointRow> point_table(const FitResult& fit) {
  std::vector<PointRow> rows;
  const int S = fit.params_hat.n_species;
  for (int s = 0; s < S; ++s) {
    rows.push_back({"p:" + fit.species[s], fit.params_hat.p[s]});
  }
  for (int s = 0; s < S; ++s) {
    rows.push_back({"marginal:" + fit.species[s], marginal_occupancy(fit.params_hat, s)});
  }
  for (int s = 1; s < S; ++s) {
    for (const bool present : {true, false}) {
      double value;
      try {
        value = conditional_occupancy(fit.params_hat, 0, s, present);
      } catch (const std::domain_error&) {
        continue;
      }
      rows.push_back({"conditional:" + fit.species[0] + "|" + fit.species[s] +
                          (present ? "=present" : "=absent"),
                      value});
    }
  }
  return rows;
}

}  // namespace

ExperimentReport run_experiment(const std::vector<ImageRecord>& records,
                                const std::vector<DeploymentWindow>& deployments,
                                const std::vector<SpeciesLabel>& species_filter,
                                const RowStochastic& probs, const FitOptions& opts,
                                std::uint64_t seed, Warnings* warnings) {
  const std::vector<ImageRecord> classified =
      corrupt_labels(records, probs, Rng::substream(seed, 1));

  const DetectionHistory truth_history =
      build_detection_history(records, deployments, species_filter, LabelSource::truth, warnings);
  const DetectionHistory classified_history = build_detection_history(
      classified, deployments, species_filter, LabelSource::predicted, warnings);

  ExperimentReport report;
  report.fit_truth = fit(truth_history, opts);
  report.fit_classified = fit(classified_history, opts);

  const std::vector<PointRow> truth_rows = point_table(report.fit_truth);
  const std::vector<PointRow> classified_rows = point_table(report.fit_classified);
  std::unordered_map<std::string, double> classified_by_name;
  for (const PointRow& row : classified_rows) classified_by_name.emplace(row.quantity, row.value);
  for (const PointRow& row : truth_rows) {
    const auto it = classified_by_name.find(row.quantity);
    if (it == classified_by_name.end()) continue;
    DeltaRow delta;
    delta.quantity = row.quantity;
    delta.truth = row.value;
    delta.classified = it->second;
    delta.delta = std::abs(row.value - it->second);
    report.deltas.push_back(std::move(delta));
  }

  report.confusion = confusion_matrix(classified);
  report.metrics = precision_recall(report.confusion);
  return report;
}

}  // namespace cooccur
