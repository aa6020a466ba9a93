#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cooccur/common.hpp"

namespace cooccur {

/// Species class token. Case-sensitive, non-empty, free of the CSV field
/// separator; validated wherever a registry is built.
using SpeciesLabel = std::string;

/// Calendar date-time, UTC, second precision. No timezone arithmetic is ever
/// done: survey occasions are calendar months in UTC.
struct CivilDateTime {
  int year = 0;
  int month = 1;  // 1..12
  int day = 1;    // 1..31, validated against the month
  int hour = 0;
  int minute = 0;
  int second = 0;

  friend auto operator<=>(const CivilDateTime&, const CivilDateTime&) = default;
};

/// Months since year 0, i.e. year * 12 + (month - 1). Occasion arithmetic
/// happens on this index.
using MonthIndex = int;

MonthIndex month_of(const CivilDateTime& t);
std::string format_month(MonthIndex m);       // "2017-03"
MonthIndex parse_month(std::string_view s);   // inverse of format_month

/// Parses "YYYY-MM-DD[ T]HH:MM:SS[Z]" or a bare "YYYY-MM-DD" (midnight).
/// Throws std::invalid_argument on anything else, including impossible
/// calendar dates.
CivilDateTime parse_datetime(std::string_view s);
/// Parses "YYYY-MM-DD" only.
CivilDateTime parse_date(std::string_view s);
std::string format_datetime(const CivilDateTime& t);  // "YYYY-MM-DDTHH:MM:SSZ"
std::string format_date(const CivilDateTime& t);      // "YYYY-MM-DD"

/// One labelled camera-trap photo event.
struct ImageRecord {
  std::string site_id;
  CivilDateTime timestamp;
  SpeciesLabel label_true;
  std::optional<SpeciesLabel> label_pred;
};

/// Date span over which a site's cameras were active.
struct DeploymentWindow {
  std::string site_id;
  CivilDateTime start;
  CivilDateTime end;  // inclusive; start <= end
};

/// One detection-history cell.
enum class Cell : std::int8_t {
  missing = -1,       // no survey effort at that site-month
  no_detection = 0,
  detection = 1,
};

/// Which label an ImageRecord contributes under.
enum class LabelSource { truth, predicted };

/// Monthly detection histories: species x site x occasion cells. Effort is
/// site-occasion level, so for a fixed (site, occasion) all species cells are
/// either missing or all present.
struct DetectionHistory {
  std::vector<SpeciesLabel> species;  // S, in species-filter order
  std::vector<std::string> sites;     // I, sorted
  std::vector<MonthIndex> occasions;  // T consecutive months
  std::vector<Cell> y;                // row-major S*I*T

  int n_species() const { return static_cast<int>(species.size()); }
  int n_sites() const { return static_cast<int>(sites.size()); }
  int n_occasions() const { return static_cast<int>(occasions.size()); }

  std::size_t index(int s, int i, int t) const {
    return (static_cast<std::size_t>(s) * sites.size() + static_cast<std::size_t>(i)) *
               occasions.size() +
           static_cast<std::size_t>(t);
  }
  Cell at(int s, int i, int t) const { return y[index(s, i, t)]; }
  Cell& at(int s, int i, int t) { return y[index(s, i, t)]; }

  /// Throws std::invalid_argument if any structural invariant is broken
  /// (shape mismatch, non-consecutive occasions, ragged effort, duplicate
  /// registry entries).
  void validate() const;
};

/// Builds the monthly detection history for the filtered species.
///
/// The occasion grid spans every calendar month from the earliest to the
/// latest active month over all sites. A site-month is active when it
/// intersects one of the site's deployment windows; with no deployments at
/// all, each site's window is inferred as [first record month, last record
/// month] over all of its records, whatever their species. Records falling
/// outside the declared windows still mark their site-month active (a photo
/// is proof the camera was running) and emit a warning.
///
/// Cells: detection if the site-month has a record of that species under
/// label_source, no_detection if active without one, missing otherwise.
/// Records of species outside the filter are dropped silently; filter
/// species with no records at all emit a warning.
DetectionHistory build_detection_history(const std::vector<ImageRecord>& records,
                                         const std::vector<DeploymentWindow>& deployments,
                                         const std::vector<SpeciesLabel>& species_filter,
                                         LabelSource label_source,
                                         Warnings* warnings = nullptr);

/// Naive per-species tallies, before any modelling.
struct SpeciesSummaryRow {
  SpeciesLabel species;
  long n_detections = 0;      // cells equal to detection
  long n_active_cells = 0;    // non-missing cells
  long n_sites_detected = 0;  // sites with at least one detection
  double naive_occupancy = 0.0;  // n_sites_detected / n_sites
};

std::vector<SpeciesSummaryRow> history_summary(const DetectionHistory& h);

}  // namespace cooccur
