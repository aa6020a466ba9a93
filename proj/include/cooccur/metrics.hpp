#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cooccur/common.hpp"
#include "cooccur/survey.hpp"

namespace cooccur {

/// Counts of true-vs-predicted label pairs. counts(a, b) is the number of
/// records with true label labels[a] predicted as labels[b].
struct ConfusionMatrix {
  std::vector<SpeciesLabel> labels;  // K, sorted
  Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> counts;  // K x K, nonnegative

  long total() const { return counts.sum(); }
  void validate() const;
};

/// Per-class precision/recall plus overall accuracy. A metric whose defining
/// denominator is zero is left unset (serialized as null), never folded to 0.
struct MetricsReport {
  std::vector<SpeciesLabel> labels;
  std::vector<std::optional<double>> precision;
  std::vector<std::optional<double>> recall;
  std::vector<long> support;  // true instances per class (row sums)
  double accuracy = 0.0;
};

/// Tallies true vs predicted labels over the record list. The label set is
/// the sorted union of both sides. Every record must carry a prediction.
ConfusionMatrix confusion_matrix(const std::vector<ImageRecord>& records);

MetricsReport precision_recall(const ConfusionMatrix& cm);

/// Row-stochastic misclassification probabilities. Rows with no mass are
/// dropped, so row_labels may be a subset of col_labels.
struct RowStochastic {
  std::vector<SpeciesLabel> row_labels;
  std::vector<SpeciesLabel> col_labels;
  Eigen::MatrixXd probs;  // row_labels.size() x col_labels.size(), rows sum to 1

  void validate() const;
  /// Diagonal matrix over the given labels (no corruption).
  static RowStochastic identity(const std::vector<SpeciesLabel>& labels);
};

/// Divides each row of the confusion matrix by its sum. All-zero rows are
/// dropped with a warning; an entirely zero matrix is an error.
RowStochastic row_normalize(const ConfusionMatrix& cm, Warnings* warnings = nullptr);

}  // namespace cooccur
