#include "cooccur/metrics.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace cooccur {

void ConfusionMatrix::validate() const {
  const auto k = static_cast<Eigen::Index>(labels.size());
  if (k < 1) throw std::invalid_argument("confusion matrix needs at least one label");
  if (counts.rows() != k || counts.cols() != k)
    throw std::invalid_argument("confusion matrix count shape does not match its labels");
  if ((counts.array() < 0).any())
    throw std::invalid_argument("confusion matrix counts must be nonnegative");
  std::set<SpeciesLabel> uniq(labels.begin(), labels.end());
  if (uniq.size() != labels.size())
    throw std::invalid_argument("duplicate label in confusion matrix");
}

ConfusionMatrix confusion_matrix(const std::vector<ImageRecord>& records) {
  if (records.empty()) throw std::invalid_argument("no records");
  std::set<SpeciesLabel> label_set;
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (!records[r].label_pred.has_value())
      throw std::invalid_argument("record " + std::to_string(r) + " has no predicted label");
    label_set.insert(records[r].label_true);
    label_set.insert(*records[r].label_pred);
  }
  ConfusionMatrix cm;
  cm.labels.assign(label_set.begin(), label_set.end());
  std::map<SpeciesLabel, Eigen::Index> index;
  for (std::size_t k = 0; k < cm.labels.size(); ++k)
    index[cm.labels[k]] = static_cast<Eigen::Index>(k);
  cm.counts.setZero(static_cast<Eigen::Index>(cm.labels.size()),
                    static_cast<Eigen::Index>(cm.labels.size()));
  for (const auto& r : records) ++cm.counts(index.at(r.label_true), index.at(*r.label_pred));
  return cm;
}

MetricsReport precision_recall(const ConfusionMatrix& cm) {
  cm.validate();
  const long total = cm.total();
  if (total == 0) throw std::invalid_argument("empty confusion matrix");
  const Eigen::Index k = cm.counts.rows();
  MetricsReport report;
  report.labels = cm.labels;
  report.precision.resize(cm.labels.size());
  report.recall.resize(cm.labels.size());
  report.support.resize(cm.labels.size());
  long trace = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const long tp = cm.counts(c, c);
    const long row = cm.counts.row(c).sum();  // tp + fn
    const long col = cm.counts.col(c).sum();  // tp + fp
    trace += tp;
    report.support[c] = row;
    if (row > 0) report.recall[c] = static_cast<double>(tp) / static_cast<double>(row);
    if (col > 0) report.precision[c] = static_cast<double>(tp) / static_cast<double>(col);
  }
  report.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return report;
}

void RowStochastic::validate() const {
  if (row_labels.empty() || col_labels.empty())
    throw std::invalid_argument("row-stochastic matrix needs labels on both axes");
  if (probs.rows() != static_cast<Eigen::Index>(row_labels.size()) ||
      probs.cols() != static_cast<Eigen::Index>(col_labels.size()))
    throw std::invalid_argument("row-stochastic matrix shape does not match its labels");
  if ((probs.array() < 0.0).any())
    throw std::invalid_argument("row-stochastic matrix has negative entries");
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (std::abs(probs.row(r).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("row for label '" + row_labels[r] + "' does not sum to 1");
  }
}

RowStochastic RowStochastic::identity(const std::vector<SpeciesLabel>& labels) {
  RowStochastic rs;
  rs.row_labels = labels;
  rs.col_labels = labels;
  rs.probs = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(labels.size()),
                                       static_cast<Eigen::Index>(labels.size()));
  rs.validate();
  return rs;
}

RowStochastic row_normalize(const ConfusionMatrix& cm, Warnings* warnings) {
  cm.validate();
  if (cm.total() == 0) throw std::invalid_argument("empty confusion matrix");
  RowStochastic rs;
  rs.col_labels = cm.labels;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    if (cm.counts.row(r).sum() > 0) {
      keep.push_back(r);
    } else {
      warn(warnings, "label '" + cm.labels[r] + "' has no true instances; row dropped");
    }
  }
  rs.probs.resize(static_cast<Eigen::Index>(keep.size()), cm.counts.cols());
  for (std::size_t out = 0; out < keep.size(); ++out) {
    const Eigen::Index r = keep[out];
    rs.row_labels.push_back(cm.labels[r]);
    const double row_sum = static_cast<double>(cm.counts.row(r).sum());
    rs.probs.row(static_cast<Eigen::Index>(out)) =
        cm.counts.row(r).cast<double>() / row_sum;
  }
  return rs;
}

}  // namespace cooccur
