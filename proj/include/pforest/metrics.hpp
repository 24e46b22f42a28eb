#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pforest/forest.hpp"

namespace pforest {

/// One metrics table row: a (model, dataset, condition, n) cell with its
/// across-group mean and population standard deviation. asr_* are absent for
/// the clean condition and whenever no group had a clean-correct question to
/// attack (the rate is undefined there, never zero).
struct MetricRow {
  std::string model;
  std::string dataset;
  std::string condition;
  int n{0};
  double acc_mean{0.0};
  double acc_std{0.0};
  std::optional<double> asr_mean;
  std::optional<double> asr_std;
  int group_count{0};
};

/// Numerator rule for the attack success rate. Restricted counts flips among
/// clean-correct questions only (rate is in [0,1] by construction); Literal
/// counts every noisy miss against the clean-correct denominator, which can
/// exceed 1 when noise breaks questions that were already wrong.
enum class AsrFormula { Restricted, Literal };

/// Fraction of group predictions that are correct. `expected_ids` pins the
/// question universe: a missing, duplicate, or unknown question id is an
/// error, so partial groups can never inflate the score.
double accuracy(const std::vector<Prediction>& group_predictions,
                const std::vector<std::string>& expected_ids);

/// Attack success rate of one noisy group against its clean counterpart,
/// aligned by question id. nullopt when no question was clean-correct.
std::optional<double> attack_success_rate(const std::vector<Prediction>& clean_group,
                                          const std::vector<Prediction>& noisy_group,
                                          AsrFormula formula = AsrFormula::Restricted);

/// Mean and population standard deviation (the N-denominator kind: a single
/// group aggregates to std 0, not NaN).
std::pair<double, double> aggregate_groups(const std::vector<double>& values);

/// Builds the full row set for one model/dataset: clean rows plus one row per
/// noisy condition, for every n present. Noisy groups pair with the clean
/// group of the same (n, group_index).
std::vector<MetricRow> compute_metric_rows(
    const std::string& model, const std::string& dataset,
    const std::vector<Prediction>& clean_predictions,
    const std::map<std::string, std::vector<Prediction>>& noisy_by_condition,
    AsrFormula formula = AsrFormula::Restricted);

/// CSV with header model,dataset,condition,n,acc_mean,acc_std,asr_mean,
/// asr_std,group_count. Undefined ASR cells are left empty. Doubles print in
/// shortest round-trip form, so rewriting the same rows is byte-identical.
void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

}  // namespace pforest
