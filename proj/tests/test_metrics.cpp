#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>

#include "cooccur/metrics.hpp"

using namespace cooccur;

namespace {

ImageRecord pair_record(const std::string& truth, const std::string& pred, int serial) {
  ImageRecord r;
  r.site_id = "site";
  r.timestamp = CivilDateTime{2017, 1 + serial % 12, 1 + serial % 28};
  r.label_true = truth;
  r.label_pred = pred;
  return r;
}

std::vector<ImageRecord> repeat_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs_with_counts) {
  std::vector<ImageRecord> records;
  int serial = 0;
  for (const auto& [truth, pred] : pairs_with_counts) records.push_back(pair_record(truth, pred, serial++));
  return records;
}

/// Independent tally oracle: hash-map of (true, pred) pairs, no Eigen.
std::map<std::pair<std::string, std::string>, long> oracle_tally(
    const std::vector<ImageRecord>& records) {
  std::map<std::pair<std::string, std::string>, long> tally;
  for (const auto& r : records) ++tally[{r.label_true, *r.label_pred}];
  return tally;
}

}  // namespace

TEST_CASE("perfect agreement gives the identity pattern") {
  std::vector<ImageRecord> records;
  for (int k = 0; k < 4; ++k) {
    records.push_back(pair_record("lynx", "lynx", k));
    records.push_back(pair_record("fox", "fox", k));
  }
  const auto cm = confusion_matrix(records);
  REQUIRE(cm.labels == std::vector<SpeciesLabel>{"fox", "lynx"});
  CHECK(cm.counts(0, 0) == 4);
  CHECK(cm.counts(1, 1) == 4);
  CHECK(cm.counts(0, 1) == 0);
  CHECK(cm.counts(1, 0) == 0);

  const auto report = precision_recall(cm);
  CHECK(report.accuracy == 1.0);
  for (int k = 0; k < 2; ++k) {
    REQUIRE(report.precision[k].has_value());
    REQUIRE(report.recall[k].has_value());
    CHECK(*report.precision[k] == 1.0);
    CHECK(*report.recall[k] == 1.0);
    CHECK(report.support[k] == 4);
  }
}

TEST_CASE("a single split row computes exact rates") {
  // One lynx kept, one lynx called fox: recall(lynx) = 1/2, precision(fox)
  // has a false positive but no true positive.
  const auto cm = confusion_matrix(repeat_pairs({{"lynx", "lynx"}, {"lynx", "fox"}}));
  const auto report = precision_recall(cm);
  REQUIRE(report.labels == std::vector<SpeciesLabel>{"fox", "lynx"});
  CHECK(*report.recall[1] == 0.5);
  CHECK(*report.precision[1] == 1.0);
  CHECK(report.support[1] == 2);
  CHECK(*report.precision[0] == 0.0);   // fox predicted once, never truly fox
  CHECK_FALSE(report.recall[0].has_value());  // no true fox instances
  CHECK(report.support[0] == 0);
  CHECK(report.accuracy == 0.5);
}

TEST_CASE("published per-class recalls come out as exact ratios") {
  // 19 of 20 lynx kept -> recall 0.95; 2 of 25 chamois kept -> recall 0.08.
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int k = 0; k < 19; ++k) pairs.emplace_back("lynx", "lynx");
  pairs.emplace_back("lynx", "chamois");
  for (int k = 0; k < 2; ++k) pairs.emplace_back("chamois", "chamois");
  for (int k = 0; k < 23; ++k) pairs.emplace_back("chamois", "other");
  const auto report = precision_recall(confusion_matrix(repeat_pairs(pairs)));
  REQUIRE(report.labels == std::vector<SpeciesLabel>{"chamois", "lynx", "other"});
  CHECK(*report.recall[1] == 0.95);  // exact: 19/20 is representable
  CHECK(*report.recall[0] == 0.08);  // exact: 2/25 is representable
  CHECK_FALSE(report.recall[2].has_value());
}

TEST_CASE("zero-denominator metrics stay unset instead of becoming zero") {
  // red_deer appears as a true label but is never predicted, and "ghost" is
  // predicted but never true.
  const auto cm = confusion_matrix(
      repeat_pairs({{"red_deer", "ghost"}, {"lynx", "lynx"}}));
  const auto report = precision_recall(cm);
  const auto idx = [&](const std::string& label) {
    return static_cast<int>(std::find(report.labels.begin(), report.labels.end(), label) -
                            report.labels.begin());
  };
  CHECK_FALSE(report.precision[idx("red_deer")].has_value());  // never predicted
  CHECK(*report.recall[idx("red_deer")] == 0.0);
  CHECK_FALSE(report.recall[idx("ghost")].has_value());  // never true
  CHECK(*report.precision[idx("ghost")] == 0.0);
}

TEST_CASE("fifty-record fixture agrees with an independent tally") {
  const std::vector<std::string> labels{"lynx", "roe_deer", "chamois", "fox", "badger"};
  std::mt19937 gen(99);
  std::vector<ImageRecord> records;
  for (int k = 0; k < 50; ++k) {
    const auto& truth = labels[gen() % labels.size()];
    // mostly correct, some confusion
    const auto& pred = (gen() % 4 == 0) ? labels[gen() % labels.size()] : truth;
    records.push_back(pair_record(truth, pred, k));
  }
  const auto cm = confusion_matrix(records);
  CHECK_NOTHROW(cm.validate());
  CHECK(cm.total() == 50);
  CHECK(std::is_sorted(cm.labels.begin(), cm.labels.end()));

  const auto tally = oracle_tally(records);
  long oracle_total = 0;
  for (int a = 0; a < static_cast<int>(cm.labels.size()); ++a) {
    for (int b = 0; b < static_cast<int>(cm.labels.size()); ++b) {
      const auto it = tally.find({cm.labels[a], cm.labels[b]});
      const long expected = it == tally.end() ? 0 : it->second;
      CHECK(cm.counts(a, b) == expected);
      oracle_total += expected;
    }
  }
  CHECK(oracle_total == 50);

  // Accuracy must equal the support-weighted mean recall, exactly: both are
  // (sum of diagonal) / total under the hood.
  const auto report = precision_recall(cm);
  double weighted = 0.0;
  long support_total = 0;
  for (std::size_t k = 0; k < report.labels.size(); ++k) {
    if (report.recall[k].has_value()) weighted += *report.recall[k] * static_cast<double>(report.support[k]);
    support_total += report.support[k];
  }
  CHECK(report.accuracy == doctest::Approx(weighted / static_cast<double>(support_total)).epsilon(1e-15));
}

TEST_CASE("label relabelling permutes the report consistently") {
  std::mt19937 gen(7);
  const std::vector<std::string> labels{"a", "b", "c"};
  std::vector<ImageRecord> records;
  for (int k = 0; k < 30; ++k) {
    records.push_back(pair_record(labels[gen() % 3], labels[gen() % 3], k));
  }
  const auto base = precision_recall(confusion_matrix(records));

  // Rename a->z (sorts last); the per-class numbers must follow the label.
  auto renamed = records;
  for (auto& r : renamed) {
    if (r.label_true == "a") r.label_true = "z";
    if (r.label_pred == "a") r.label_pred = "z";
  }
  const auto moved = precision_recall(confusion_matrix(renamed));
  REQUIRE(moved.labels == std::vector<SpeciesLabel>{"b", "c", "z"});
  CHECK(moved.accuracy == base.accuracy);
  CHECK(moved.precision[2] == base.precision[0]);
  CHECK(moved.recall[2] == base.recall[0]);
  CHECK(moved.support[2] == base.support[0]);
  CHECK(moved.precision[0] == base.precision[1]);
  CHECK(moved.recall[1] == base.recall[2]);
}

TEST_CASE("confusion matrix requires predictions") {
  ImageRecord r = pair_record("lynx", "lynx", 0);
  r.label_pred.reset();
  CHECK_THROWS_WITH_AS(confusion_matrix({pair_record("lynx", "lynx", 0), r}),
                       doctest::Contains("record 1 has no predicted label"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(confusion_matrix({}), doctest::Contains("no records"),
                       std::invalid_argument);
}

TEST_CASE("row normalization divides by row sums") {
  const auto cm = confusion_matrix(repeat_pairs({
      {"lynx", "lynx"},
      {"lynx", "fox"},
      {"lynx", "fox"},
      {"lynx", "fox"},
      {"fox", "fox"},
  }));
  const auto probs = row_normalize(cm);
  CHECK_NOTHROW(probs.validate());
  REQUIRE(probs.row_labels == std::vector<SpeciesLabel>{"fox", "lynx"});
  REQUIRE(probs.col_labels == probs.row_labels);
  CHECK(probs.probs(1, 1) == 0.25);
  CHECK(probs.probs(1, 0) == 0.75);
  CHECK(probs.probs(0, 0) == 1.0);
  CHECK(probs.probs(0, 1) == 0.0);
  for (int r = 0; r < probs.probs.rows(); ++r) {
    CHECK(probs.probs.row(r).sum() == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("all-zero rows are dropped with a warning") {
  ConfusionMatrix cm;
  cm.labels = {"chamois", "lynx", "wolf"};
  cm.counts.setZero(3, 3);
  cm.counts(0, 0) = 2;
  cm.counts(0, 1) = 6;
  cm.counts(1, 1) = 4;
  // wolf row is all zero
  Warnings warnings;
  const auto probs = row_normalize(cm, &warnings);
  REQUIRE(probs.row_labels == std::vector<SpeciesLabel>{"chamois", "lynx"});
  REQUIRE(probs.col_labels == std::vector<SpeciesLabel>{"chamois", "lynx", "wolf"});
  CHECK(probs.probs(0, 0) == 0.25);
  CHECK(probs.probs(0, 1) == 0.75);
  CHECK(probs.probs(1, 1) == 1.0);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0] == "label 'wolf' has no true instances; row dropped");
}

TEST_CASE("an entirely empty confusion matrix cannot be normalized") {
  ConfusionMatrix cm;
  cm.labels = {"lynx"};
  cm.counts.setZero(1, 1);
  CHECK_THROWS_WITH_AS(row_normalize(cm), "empty confusion matrix", std::invalid_argument);

  ConfusionMatrix empty;
  CHECK_THROWS_WITH_AS(empty.validate(), doctest::Contains("at least one label"),
                       std::invalid_argument);
}

TEST_CASE("identity corruption matrix") {
  const auto id = RowStochastic::identity({"a", "b", "c"});
  CHECK_NOTHROW(id.validate());
  CHECK(id.row_labels == id.col_labels);
  CHECK(id.probs.isIdentity(0.0));
}

TEST_CASE("row-stochastic validation") {
  RowStochastic bad;
  bad.row_labels = {"a"};
  bad.col_labels = {"a", "b"};
  bad.probs.resize(1, 2);
  bad.probs << 0.6, 0.6;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("does not sum to 1"),
                       std::invalid_argument);
  bad.probs << 1.2, -0.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
