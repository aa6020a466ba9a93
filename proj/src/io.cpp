#include "cooccur/io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace cooccur {

namespace {

std::string row_context(const std::string& path, std::size_t row) {
  return path + ": row " + std::to_string(row) + ": ";
}

/// Splits file content into lines, tolerating CRLF and a trailing newline.
std::vector<std::string> read_lines(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<std::string> lines;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(begin, end - begin);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    begin = end + 1;
    if (begin > text.size() && line.empty()) break;  // trailing newline
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = line.find(',', begin);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(begin));
      return fields;
    }
    fields.push_back(line.substr(begin, comma - begin));
    begin = comma + 1;
  }
}

std::vector<std::string> parse_row(const std::string& path, std::size_t row,
                                   const std::string& line, std::size_t n_fields) {
  std::vector<std::string> fields = split_fields(line);
  if (fields.size() != n_fields) {
    throw std::runtime_error(row_context(path, row) + "expected " + std::to_string(n_fields) +
                             " fields, got " + std::to_string(fields.size()));
  }
  return fields;
}

void expect_header(const std::string& path, const std::vector<std::string>& lines,
                   const std::string& header) {
  if (lines.empty()) throw std::runtime_error(path + ": empty file");
  if (lines[0] != header) {
    throw std::runtime_error(path + ": unexpected header '" + lines[0] + "' (expected '" +
                             header + "')");
  }
}

long parse_count(const std::string& path, std::size_t row, const std::string& field) {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || value < 0) {
    throw std::runtime_error(row_context(path, row) + "invalid count '" + field + "'");
  }
  return value;
}

double parse_real(const std::string& path, std::size_t row, const std::string& field) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw std::runtime_error(row_context(path, row) + "invalid number '" + field + "'");
  }
  return value;
}

/// Shortest round-trip decimal form, identical to the JSON writer's.
std::string format_double(double value) { return Json(value).dump(); }

const Json& require_field(const Json& j, const char* key, const char* what) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw std::runtime_error(std::string(what) + ": missing field '" + key + "'");
  }
  return *it;
}

std::vector<std::string> string_array(const Json& j, const char* key, const char* what) {
  const Json& field = require_field(j, key, what);
  if (!field.is_array()) {
    throw std::runtime_error(std::string(what) + ": field '" + key + "' must be an array");
  }
  std::vector<std::string> values;
  for (const Json& element : field) {
    if (!element.is_string()) {
      throw std::runtime_error(std::string(what) + ": field '" + key +
                               "' must contain only strings");
    }
    values.push_back(element.get<std::string>());
  }
  return values;
}

}  // namespace

std::vector<ImageRecord> read_images_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  expect_header(path, lines, "site_id,timestamp,label_true,label_pred");
  std::vector<ImageRecord> records;
  records.reserve(lines.size() - 1);
  for (std::size_t row = 2; row <= lines.size(); ++row) {
    const std::vector<std::string> fields = parse_row(path, row, lines[row - 1], 4);
    ImageRecord record;
    record.site_id = fields[0];
    if (record.site_id.empty()) {
      throw std::runtime_error(row_context(path, row) + "empty site_id");
    }
    try {
      record.timestamp = parse_datetime(fields[1]);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(row_context(path, row) + e.what());
    }
    record.label_true = fields[2];
    if (record.label_true.empty()) {
      throw std::runtime_error(row_context(path, row) + "empty label_true");
    }
    if (!fields[3].empty()) record.label_pred = fields[3];
    records.push_back(std::move(record));
  }
  return records;
}

void write_images_csv(const std::string& path, const std::vector<ImageRecord>& records) {
  std::ostringstream out;
  out << "site_id,timestamp,label_true,label_pred\n";
  for (const ImageRecord& record : records) {
    out << record.site_id << ',' << format_datetime(record.timestamp) << ',' << record.label_true
        << ',' << record.label_pred.value_or("") << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<DeploymentWindow> read_deployments_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  expect_header(path, lines, "site_id,start,end");
  std::vector<DeploymentWindow> windows;
  windows.reserve(lines.size() - 1);
  for (std::size_t row = 2; row <= lines.size(); ++row) {
    const std::vector<std::string> fields = parse_row(path, row, lines[row - 1], 3);
    DeploymentWindow window;
    window.site_id = fields[0];
    if (window.site_id.empty()) {
      throw std::runtime_error(row_context(path, row) + "empty site_id");
    }
    try {
      window.start = parse_date(fields[1]);
      window.end = parse_date(fields[2]);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(row_context(path, row) + e.what());
    }
    if (window.end < window.start) {
      throw std::runtime_error(row_context(path, row) + "deployment ends before it starts");
    }
    windows.push_back(std::move(window));
  }
  return windows;
}

void write_confusion_csv(const std::string& path, const ConfusionMatrix& cm) {
  cm.validate();
  std::ostringstream out;
  out << "label";
  for (const SpeciesLabel& label : cm.labels) out << ',' << label;
  out << '\n';
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    out << cm.labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) out << ',' << cm.counts(r, c);
    out << '\n';
  }
  write_text_file(path, out.str());
}

ConfusionMatrix read_confusion_csv(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty file");
  const std::vector<std::string> header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "label") {
    throw std::runtime_error(path + ": unexpected header '" + lines[0] + "'");
  }
  const std::vector<SpeciesLabel> labels(header.begin() + 1, header.end());
  const std::size_t k = labels.size();
  if (lines.size() - 1 != k) {
    throw std::runtime_error(path + ": expected " + std::to_string(k) + " data rows, got " +
                             std::to_string(lines.size() - 1));
  }
  ConfusionMatrix cm;
  cm.labels = labels;
  cm.counts.setZero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t row = 2; row <= lines.size(); ++row) {
    const std::vector<std::string> fields = parse_row(path, row, lines[row - 1], k + 1);
    if (fields[0] != labels[row - 2]) {
      throw std::runtime_error(row_context(path, row) + "row label '" + fields[0] +
                               "' does not match column order");
    }
    for (std::size_t c = 0; c < k; ++c) {
      cm.counts(static_cast<Eigen::Index>(row - 2), static_cast<Eigen::Index>(c)) =
          parse_count(path, row, fields[c + 1]);
    }
  }
  cm.validate();
  return cm;
}

RowStochastic read_probs_csv(const std::string& path, Warnings* warnings) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error(path + ": empty file");
  const std::vector<std::string> header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "label") {
    throw std::runtime_error(path + ": unexpected header '" + lines[0] + "'");
  }
  const std::vector<SpeciesLabel> col_labels(header.begin() + 1, header.end());
  const std::size_t k = col_labels.size();

  std::vector<SpeciesLabel> row_labels;
  std::vector<Eigen::VectorXd> rows;
  for (std::size_t row = 2; row <= lines.size(); ++row) {
    const std::vector<std::string> fields = parse_row(path, row, lines[row - 1], k + 1);
    Eigen::VectorXd values(static_cast<Eigen::Index>(k));
    for (std::size_t c = 0; c < k; ++c) {
      values[static_cast<Eigen::Index>(c)] = parse_real(path, row, fields[c + 1]);
      if (values[static_cast<Eigen::Index>(c)] < 0.0) {
        throw std::runtime_error(row_context(path, row) + "negative probability");
      }
    }
    const double total = values.sum();
    if (total == 0.0) {
      warn(warnings, "label '" + fields[0] + "' has an all-zero row; dropped");
      continue;
    }
    row_labels.push_back(fields[0]);
    rows.push_back(values / total);
  }
  if (rows.empty()) throw std::runtime_error(path + ": corruption matrix has no mass");

  RowStochastic probs;
  probs.row_labels = std::move(row_labels);
  probs.col_labels = col_labels;
  probs.probs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    probs.probs.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  }
  probs.validate();
  return probs;
}

Json history_to_json(const DetectionHistory& h) {
  h.validate();
  Json j;
  j["species"] = h.species;
  j["sites"] = h.sites;
  Json occasions = Json::array();
  for (const MonthIndex m : h.occasions) occasions.push_back(format_month(m));
  j["occasions"] = std::move(occasions);
  Json y = Json::array();
  for (const Cell cell : h.y) {
    if (cell == Cell::missing) {
      y.push_back(nullptr);
    } else {
      y.push_back(static_cast<int>(cell));
    }
  }
  j["y"] = std::move(y);
  return j;
}

DetectionHistory history_from_json(const Json& j) {
  constexpr const char* what = "history JSON";
  if (!j.is_object()) throw std::runtime_error(std::string(what) + ": expected an object");
  DetectionHistory h;
  h.species = string_array(j, "species", what);
  h.sites = string_array(j, "sites", what);
  for (const std::string& month : string_array(j, "occasions", what)) {
    try {
      h.occasions.push_back(parse_month(month));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string(what) + ": " + e.what());
    }
  }
  const Json& y = require_field(j, "y", what);
  if (!y.is_array()) throw std::runtime_error(std::string(what) + ": field 'y' must be an array");
  h.y.reserve(y.size());
  for (const Json& cell : y) {
    if (cell.is_null()) {
      h.y.push_back(Cell::missing);
    } else if (cell.is_number_integer() &&
               (cell.get<int>() == 0 || cell.get<int>() == 1)) {
      h.y.push_back(static_cast<Cell>(cell.get<int>()));
    } else {
      throw std::runtime_error(std::string(what) + ": y entries must be 0, 1, or null");
    }
  }
  try {
    h.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string(what) + ": " + e.what());
  }
  return h;
}

Json params_to_json(const OccupancyParams& params, const std::vector<SpeciesLabel>& species) {
  if (static_cast<int>(species.size()) != params.n_species) {
    throw std::invalid_argument("species labels do not match the parameter dimension");
  }
  Json j;
  j["species"] = species;
  Json psi = Json::object();
  for (Eigen::Index k = 0; k < params.psi.size(); ++k) {
    psi[state_label(static_cast<int>(k), params.n_species)] = params.psi[k];
  }
  j["psi"] = std::move(psi);
  Json p = Json::object();
  for (int s = 0; s < params.n_species; ++s) {
    p[species[static_cast<std::size_t>(s)]] = params.p[s];
  }
  j["p"] = std::move(p);
  return j;
}

std::pair<OccupancyParams, std::vector<SpeciesLabel>> params_from_json(const Json& j) {
  constexpr const char* what = "params JSON";
  if (!j.is_object()) throw std::runtime_error(std::string(what) + ": expected an object");
  const std::vector<SpeciesLabel> species = string_array(j, "species", what);
  const int n_species = static_cast<int>(species.size());
  if (n_species < 1) throw std::runtime_error(std::string(what) + ": species list is empty");
  if (n_species > kMaxSpecies) {
    throw std::runtime_error(std::string(what) + ": latent state space too large");
  }
  const std::set<SpeciesLabel> unique(species.begin(), species.end());
  if (unique.size() != species.size()) {
    throw std::runtime_error(std::string(what) + ": species labels must be unique");
  }
  const int n_states = 1 << n_species;

  const auto number_at = [what](const Json& field, const std::string& key) {
    const auto it = field.find(key);
    if (it == field.end() || !it->is_number()) {
      throw std::runtime_error(std::string(what) + ": missing or non-numeric entry '" + key +
                               "'");
    }
    return it->get<double>();
  };

  const Json& psi_field = require_field(j, "psi", what);
  Eigen::VectorXd psi(n_states);
  if (psi_field.is_array()) {
    if (static_cast<int>(psi_field.size()) != n_states) {
      throw std::runtime_error(std::string(what) + ": psi must have 2^S entries");
    }
    for (int k = 0; k < n_states; ++k) {
      if (!psi_field[static_cast<std::size_t>(k)].is_number()) {
        throw std::runtime_error(std::string(what) + ": psi entries must be numbers");
      }
      psi[k] = psi_field[static_cast<std::size_t>(k)].get<double>();
    }
  } else if (psi_field.is_object()) {
    if (static_cast<int>(psi_field.size()) != n_states) {
      throw std::runtime_error(std::string(what) + ": psi must have 2^S entries");
    }
    for (int k = 0; k < n_states; ++k) {
      psi[k] = number_at(psi_field, state_label(k, n_species));
    }
  } else {
    throw std::runtime_error(std::string(what) + ": psi must be an array or object");
  }

  const Json& p_field = require_field(j, "p", what);
  Eigen::VectorXd p(n_species);
  if (p_field.is_array()) {
    if (static_cast<int>(p_field.size()) != n_species) {
      throw std::runtime_error(std::string(what) + ": p must have one entry per species");
    }
    for (int s = 0; s < n_species; ++s) {
      if (!p_field[static_cast<std::size_t>(s)].is_number()) {
        throw std::runtime_error(std::string(what) + ": p entries must be numbers");
      }
      p[s] = p_field[static_cast<std::size_t>(s)].get<double>();
    }
  } else if (p_field.is_object()) {
    if (static_cast<int>(p_field.size()) != static_cast<int>(species.size())) {
      throw std::runtime_error(std::string(what) + ": p must have one entry per species");
    }
    for (int s = 0; s < n_species; ++s) {
      p[s] = number_at(p_field, species[static_cast<std::size_t>(s)]);
    }
  } else {
    throw std::runtime_error(std::string(what) + ": p must be an array or object");
  }

  try {
    return {make_params(std::move(psi), std::move(p)), species};
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string(what) + ": " + e.what());
  }
}

Json confusion_to_json(const ConfusionMatrix& cm) {
  Json j;
  j["labels"] = cm.labels;
  Json counts = Json::array();
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) row.push_back(cm.counts(r, c));
    counts.push_back(std::move(row));
  }
  j["counts"] = std::move(counts);
  return j;
}

Json metrics_to_json(const MetricsReport& report) {
  Json j;
  j["labels"] = report.labels;
  const auto optional_array = [](const std::vector<std::optional<double>>& values) {
    Json array = Json::array();
    for (const std::optional<double>& value : values) {
      if (value) {
        array.push_back(*value);
      } else {
        array.push_back(nullptr);
      }
    }
    return array;
  };
  j["precision"] = optional_array(report.precision);
  j["recall"] = optional_array(report.recall);
  j["support"] = report.support;
  j["accuracy"] = report.accuracy;
  return j;
}

Json estimates_to_json(const std::vector<EstimateRow>& rows, double level) {
  Json estimates = Json::array();
  for (const EstimateRow& row : rows) {
    Json entry;
    entry["quantity"] = row.quantity;
    entry["point"] = row.point;
    if (row.has_interval) {
      entry["lower"] = row.lower;
      entry["upper"] = row.upper;
    } else {
      entry["lower"] = nullptr;
      entry["upper"] = nullptr;
    }
    entry["level"] = level;
    estimates.push_back(std::move(entry));
  }
  return estimates;
}

Json fit_result_to_json(const FitResult& fit, double level) {
  Json j;
  j["species"] = fit.species;
  j["converged"] = fit.converged;
  j["n_starts_converged"] = fit.n_starts_converged;
  j["nll"] = fit.nll;
  Json theta = Json::array();
  for (Eigen::Index k = 0; k < fit.theta_hat.size(); ++k) theta.push_back(fit.theta_hat[k]);
  j["theta_hat"] = std::move(theta);
  j["params"] = params_to_json(fit.params_hat, fit.species);
  j["boundary_warning"] = fit.boundary_warning;
  if (fit.vcov_available) {
    Json vcov = Json::array();
    for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r) {
      for (Eigen::Index c = 0; c < fit.vcov.cols(); ++c) vcov.push_back(fit.vcov(r, c));
    }
    j["vcov"] = std::move(vcov);
  } else {
    j["vcov"] = nullptr;
  }
  j["estimates"] = estimates_to_json(estimate_table(fit, level), level);
  j["warnings"] = fit.warnings;
  return j;
}

FitResult fit_result_from_json(const Json& j) {
  constexpr const char* what = "fit JSON";
  if (!j.is_object()) throw std::runtime_error(std::string(what) + ": expected an object");
  FitResult fit;
  fit.species = string_array(j, "species", what);

  const auto require_bool = [&j, what](const char* key) {
    const Json& field = require_field(j, key, what);
    if (!field.is_boolean()) {
      throw std::runtime_error(std::string(what) + ": field '" + key + "' must be a boolean");
    }
    return field.get<bool>();
  };
  const auto number_array = [what](const Json& field, const char* key) {
    if (!field.is_array()) {
      throw std::runtime_error(std::string(what) + ": field '" + key + "' must be an array");
    }
    Eigen::VectorXd values(static_cast<Eigen::Index>(field.size()));
    Eigen::Index k = 0;
    for (const Json& element : field) {
      if (!element.is_number()) {
        throw std::runtime_error(std::string(what) + ": field '" + key +
                                 "' must contain only numbers");
      }
      values[k++] = element.get<double>();
    }
    return values;
  };

  fit.converged = require_bool("converged");
  fit.boundary_warning = require_bool("boundary_warning");
  const Json& n_conv = require_field(j, "n_starts_converged", what);
  if (!n_conv.is_number_integer()) {
    throw std::runtime_error(std::string(what) + ": field 'n_starts_converged' must be an integer");
  }
  fit.n_starts_converged = n_conv.get<int>();
  const Json& nll = require_field(j, "nll", what);
  if (!nll.is_number()) {
    throw std::runtime_error(std::string(what) + ": field 'nll' must be a number");
  }
  fit.nll = nll.get<double>();
  fit.theta_hat = number_array(require_field(j, "theta_hat", what), "theta_hat");

  auto [params, param_species] = params_from_json(require_field(j, "params", what));
  if (param_species != fit.species) {
    throw std::runtime_error(std::string(what) + ": params species disagree with the fit");
  }
  fit.params_hat = std::move(params);
  const int dim = theta_dim(fit.params_hat.n_species);
  if (fit.theta_hat.size() != dim) {
    throw std::runtime_error(std::string(what) + ": theta_hat has the wrong length");
  }

  const Json& vcov = require_field(j, "vcov", what);
  if (vcov.is_null()) {
    fit.vcov_available = false;
    fit.vcov.resize(0, 0);
  } else {
    const Eigen::VectorXd flat = number_array(vcov, "vcov");
    if (flat.size() != static_cast<Eigen::Index>(dim) * dim) {
      throw std::runtime_error(std::string(what) + ": vcov has the wrong length");
    }
    fit.vcov.resize(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) fit.vcov(r, c) = flat[static_cast<Eigen::Index>(r) * dim + c];
    }
    fit.vcov_available = true;
  }
  fit.warnings = string_array(j, "warnings", what);
  return fit;
}

Json experiment_to_json(const ExperimentReport& report, double level) {
  Json j;
  j["fit_truth"] = fit_result_to_json(report.fit_truth, level);
  j["fit_classified"] = fit_result_to_json(report.fit_classified, level);
  Json deltas = Json::array();
  for (const DeltaRow& row : report.deltas) {
    Json entry;
    entry["quantity"] = row.quantity;
    entry["truth"] = row.truth;
    entry["classified"] = row.classified;
    entry["delta"] = row.delta;
    deltas.push_back(std::move(entry));
  }
  j["deltas"] = std::move(deltas);
  j["confusion"] = confusion_to_json(report.confusion);
  j["metrics"] = metrics_to_json(report.metrics);
  return j;
}

void write_estimates_csv(const std::string& path, const std::vector<EstimateRow>& rows,
                         double level) {
  std::ostringstream out;
  out << "quantity,point,lower,upper,level\n";
  for (const EstimateRow& row : rows) {
    out << row.quantity << ',' << format_double(row.point) << ',';
    if (row.has_interval) out << format_double(row.lower);
    out << ',';
    if (row.has_interval) out << format_double(row.upper);
    out << ',' << format_double(level) << '\n';
  }
  write_text_file(path, out.str());
}

void write_experiment_csv(const std::string& path, const ExperimentReport& report, double level) {
  std::ostringstream out;
  out << "dataset,quantity,point,lower,upper,level\n";
  const auto emit = [&out, level](const char* dataset, const FitResult& fit) {
    for (const EstimateRow& row : estimate_table(fit, level)) {
      out << dataset << ',' << row.quantity << ',' << format_double(row.point) << ',';
      if (row.has_interval) out << format_double(row.lower);
      out << ',';
      if (row.has_interval) out << format_double(row.upper);
      out << ',' << format_double(level) << '\n';
    }
  };
  emit("truth", report.fit_truth);
  emit("classified", report.fit_classified);
  write_text_file(path, out.str());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw std::runtime_error("cannot read '" + path + "'");
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace cooccur
