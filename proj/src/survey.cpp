#include "cooccur/survey.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace cooccur {

namespace {

bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return kDays[month - 1];
}

[[noreturn]] void bad_timestamp(std::string_view s) {
  throw std::invalid_argument("malformed timestamp '" + std::string(s) + "'");
}

int parse_int_field(std::string_view s, std::size_t pos, std::size_t len, std::string_view whole) {
  if (pos + len > s.size()) bad_timestamp(whole);
  int value = 0;
  const char* first = s.data() + pos;
  const auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) bad_timestamp(whole);
  return value;
}

void check_calendar(const CivilDateTime& t, std::string_view s) {
  if (t.month < 1 || t.month > 12) bad_timestamp(s);
  if (t.day < 1 || t.day > days_in_month(t.year, t.month)) bad_timestamp(s);
  if (t.hour < 0 || t.hour > 23 || t.minute < 0 || t.minute > 59 || t.second < 0 ||
      t.second > 59)
    bad_timestamp(s);
}

void require_label(const SpeciesLabel& label, const char* what) {
  if (label.empty())
    throw std::invalid_argument(std::string(what) + " must be a non-empty label");
  if (label.find(',') != std::string::npos || label.find('\n') != std::string::npos ||
      label.find('\r') != std::string::npos)
    throw std::invalid_argument(std::string(what) + " '" + label +
                                "' contains a field separator");
}

}  // namespace

MonthIndex month_of(const CivilDateTime& t) { return t.year * 12 + (t.month - 1); }

std::string format_month(MonthIndex m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", m / 12, m % 12 + 1);
  return buf;
}

MonthIndex parse_month(std::string_view s) {
  if (s.size() != 7 || s[4] != '-') bad_timestamp(s);
  const int year = parse_int_field(s, 0, 4, s);
  const int month = parse_int_field(s, 5, 2, s);
  if (month < 1 || month > 12) bad_timestamp(s);
  return year * 12 + (month - 1);
}

CivilDateTime parse_datetime(std::string_view s) {
  // YYYY-MM-DD, optionally followed by [T or space]HH:MM:SS and a trailing Z.
  if (s.size() < 10 || s[4] != '-' || s[7] != '-') bad_timestamp(s);
  CivilDateTime t;
  t.year = parse_int_field(s, 0, 4, s);
  t.month = parse_int_field(s, 5, 2, s);
  t.day = parse_int_field(s, 8, 2, s);
  if (s.size() > 10) {
    if ((s[10] != 'T' && s[10] != ' ') || s.size() < 19 || s[13] != ':' || s[16] != ':')
      bad_timestamp(s);
    t.hour = parse_int_field(s, 11, 2, s);
    t.minute = parse_int_field(s, 14, 2, s);
    t.second = parse_int_field(s, 17, 2, s);
    if (s.size() == 20) {
      if (s[19] != 'Z') bad_timestamp(s);
    } else if (s.size() != 19) {
      bad_timestamp(s);
    }
  }
  check_calendar(t, s);
  return t;
}

CivilDateTime parse_date(std::string_view s) {
  if (s.size() != 10) bad_timestamp(s);
  return parse_datetime(s);
}

std::string format_datetime(const CivilDateTime& t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", t.year, t.month, t.day,
                t.hour, t.minute, t.second);
  return buf;
}

std::string format_date(const CivilDateTime& t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", t.year, t.month, t.day);
  return buf;
}

void DetectionHistory::validate() const {
  if (species.empty() || sites.empty() || occasions.empty())
    throw std::invalid_argument("detection history must have at least one species, site and occasion");
  if (y.size() != species.size() * sites.size() * occasions.size())
    throw std::invalid_argument("detection history cell count does not match its registries");
  for (std::size_t t = 1; t < occasions.size(); ++t) {
    if (occasions[t] != occasions[t - 1] + 1)
      throw std::invalid_argument("occasions must be consecutive increasing months");
  }
  std::set<SpeciesLabel> sp(species.begin(), species.end());
  if (sp.size() != species.size())
    throw std::invalid_argument("duplicate species in registry");
  std::set<std::string> st(sites.begin(), sites.end());
  if (st.size() != sites.size()) throw std::invalid_argument("duplicate site in registry");
  // Effort is site-occasion level: missing cells must agree across species.
  for (int i = 0; i < n_sites(); ++i) {
    for (int t = 0; t < n_occasions(); ++t) {
      const bool miss0 = at(0, i, t) == Cell::missing;
      for (int s = 1; s < n_species(); ++s) {
        if ((at(s, i, t) == Cell::missing) != miss0)
          throw std::invalid_argument("missing cells differ across species at site " +
                                      sites[i] + ", month " + format_month(occasions[t]));
      }
    }
  }
}

DetectionHistory build_detection_history(const std::vector<ImageRecord>& records,
                                         const std::vector<DeploymentWindow>& deployments,
                                         const std::vector<SpeciesLabel>& species_filter,
                                         LabelSource label_source,
                                         Warnings* warnings) {
  if (records.empty()) throw std::invalid_argument("no records");
  if (species_filter.empty()) throw std::invalid_argument("species filter is empty");

  std::map<SpeciesLabel, int> species_index;
  for (std::size_t s = 0; s < species_filter.size(); ++s) {
    require_label(species_filter[s], "species filter entry");
    if (!species_index.emplace(species_filter[s], static_cast<int>(s)).second)
      throw std::invalid_argument("duplicate species '" + species_filter[s] + "' in filter");
  }

  if (label_source == LabelSource::predicted) {
    for (std::size_t r = 0; r < records.size(); ++r) {
      if (!records[r].label_pred.has_value())
        throw std::invalid_argument("record " + std::to_string(r) +
                                    " has no predicted label");
    }
  }

  // Site registry: sorted union of record and deployment sites.
  std::set<std::string> site_set;
  for (const auto& r : records) {
    if (r.site_id.empty()) throw std::invalid_argument("record has empty site_id");
    site_set.insert(r.site_id);
  }
  for (const auto& d : deployments) {
    if (d.site_id.empty()) throw std::invalid_argument("deployment has empty site_id");
    if (d.end < d.start)
      throw std::invalid_argument("deployment for site '" + d.site_id + "' ends before it starts");
    site_set.insert(d.site_id);
  }
  DetectionHistory h;
  h.sites.assign(site_set.begin(), site_set.end());
  std::map<std::string, int> site_index;
  for (std::size_t i = 0; i < h.sites.size(); ++i) site_index[h.sites[i]] = static_cast<int>(i);
  const int I = h.n_sites();

  // Active months per site: deployment windows, or the per-site record span
  // when no deployments were supplied at all.
  std::vector<std::set<MonthIndex>> active(I);
  if (deployments.empty()) {
    std::vector<MonthIndex> lo(I, 0), hi(I, 0);
    std::vector<bool> seen(I, false);
    for (const auto& r : records) {
      const int i = site_index.at(r.site_id);
      const MonthIndex m = month_of(r.timestamp);
      if (!seen[i]) {
        lo[i] = hi[i] = m;
        seen[i] = true;
      } else {
        lo[i] = std::min(lo[i], m);
        hi[i] = std::max(hi[i], m);
      }
    }
    for (int i = 0; i < I; ++i) {
      if (!seen[i]) continue;
      for (MonthIndex m = lo[i]; m <= hi[i]; ++m) active[i].insert(m);
    }
  } else {
    for (const auto& d : deployments) {
      const int i = site_index.at(d.site_id);
      for (MonthIndex m = month_of(d.start); m <= month_of(d.end); ++m) active[i].insert(m);
    }
    // A record outside every declared window proves the camera was running.
    std::set<std::string> patched;
    for (const auto& r : records) {
      const int i = site_index.at(r.site_id);
      const MonthIndex m = month_of(r.timestamp);
      if (active[i].insert(m).second) patched.insert(r.site_id);
    }
    for (const auto& site : patched)
      warn(warnings, "site '" + site +
                         "' has records outside its deployment windows; those months were "
                         "marked active");
  }

  // Occasion grid: every month from the earliest to the latest active month.
  MonthIndex gmin = 0, gmax = 0;
  bool any = false;
  for (const auto& a : active) {
    if (a.empty()) continue;
    if (!any) {
      gmin = *a.begin();
      gmax = *a.rbegin();
      any = true;
    } else {
      gmin = std::min(gmin, *a.begin());
      gmax = std::max(gmax, *a.rbegin());
    }
  }
  // records is non-empty, so at least one site-month is active.
  h.species = species_filter;
  for (MonthIndex m = gmin; m <= gmax; ++m) h.occasions.push_back(m);
  const int S = h.n_species();
  const int T = h.n_occasions();

  h.y.assign(static_cast<std::size_t>(S) * I * T, Cell::missing);
  for (int i = 0; i < I; ++i) {
    for (const MonthIndex m : active[i]) {
      for (int s = 0; s < S; ++s) h.at(s, i, m - gmin) = Cell::no_detection;
    }
  }

  std::vector<bool> species_seen(S, false);
  for (const auto& r : records) {
    const SpeciesLabel& label =
        label_source == LabelSource::truth ? r.label_true : *r.label_pred;
    const auto it = species_index.find(label);
    if (it == species_index.end()) continue;  // species outside the filter
    species_seen[it->second] = true;
    h.at(it->second, site_index.at(r.site_id), month_of(r.timestamp) - gmin) = Cell::detection;
  }
  for (int s = 0; s < S; ++s) {
    if (!species_seen[s])
      warn(warnings, "species '" + h.species[s] + "' does not appear in any record");
  }
  return h;
}

std::vector<SpeciesSummaryRow> history_summary(const DetectionHistory& h) {
  std::vector<SpeciesSummaryRow> rows;
  rows.reserve(h.species.size());
  for (int s = 0; s < h.n_species(); ++s) {
    SpeciesSummaryRow row;
    row.species = h.species[s];
    for (int i = 0; i < h.n_sites(); ++i) {
      bool detected = false;
      for (int t = 0; t < h.n_occasions(); ++t) {
        const Cell c = h.at(s, i, t);
        if (c == Cell::missing) continue;
        ++row.n_active_cells;
        if (c == Cell::detection) {
          ++row.n_detections;
          detected = true;
        }
      }
      if (detected) ++row.n_sites_detected;
    }
    row.naive_occupancy =
        static_cast<double>(row.n_sites_detected) / static_cast<double>(h.n_sites());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cooccur
