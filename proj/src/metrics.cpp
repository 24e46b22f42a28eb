#include "pforest/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "pforest/errors.hpp"
#include "pforest/jsonl.hpp"

namespace pforest {
namespace {

std::string shortest_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, const std::string& context) {
  double v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError(context + ": bad number \"" + std::string(s) + "\"");
  return v;
}

int parse_int(std::string_view s, const std::string& context) {
  int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError(context + ": bad integer \"" + std::string(s) + "\"");
  return v;
}

/// n -> group_index -> predictions of that group
using GroupGrid = std::map<int, std::map<int, std::vector<Prediction>>>;

GroupGrid index_groups(const std::vector<Prediction>& predictions) {
  GroupGrid grid;
  for (const Prediction& p : predictions) grid[p.n][p.group_index].push_back(p);
  return grid;
}

std::vector<std::string> question_universe(const std::vector<Prediction>& predictions) {
  std::set<std::string> ids;
  for (const Prediction& p : predictions) ids.insert(p.question_id);
  return {ids.begin(), ids.end()};
}

}  // namespace

double accuracy(const std::vector<Prediction>& group_predictions,
                const std::vector<std::string>& expected_ids) {
  if (expected_ids.empty()) throw ValidationError("empty question universe");
  std::map<std::string, int> seen;
  int correct = 0;
  for (const Prediction& p : group_predictions) {
    if (++seen[p.question_id] > 1)
      throw ValidationError("duplicate prediction for question \"" + p.question_id + "\"");
    if (p.correct) ++correct;
  }
  for (const std::string& id : expected_ids)
    if (!seen.count(id))
      throw ValidationError("missing prediction for question \"" + id + "\"");
  if (seen.size() != expected_ids.size())
    throw ValidationError("predictions reference questions outside the universe");
  return static_cast<double>(correct) / static_cast<double>(expected_ids.size());
}

std::optional<double> attack_success_rate(const std::vector<Prediction>& clean_group,
                                          const std::vector<Prediction>& noisy_group,
                                          AsrFormula formula) {
  std::map<std::string, bool> clean, noisy;
  for (const Prediction& p : clean_group)
    if (!clean.emplace(p.question_id, p.correct).second)
      throw ValidationError("duplicate clean prediction for \"" + p.question_id + "\"");
  for (const Prediction& p : noisy_group)
    if (!noisy.emplace(p.question_id, p.correct).second)
      throw ValidationError("duplicate noisy prediction for \"" + p.question_id + "\"");
  if (clean.size() != noisy.size())
    throw ValidationError("clean and noisy groups cover different question counts");

  int clean_correct = 0;
  int numerator = 0;
  for (const auto& [id, was_correct] : clean) {
    auto it = noisy.find(id);
    if (it == noisy.end())
      throw ValidationError("noisy group is missing question \"" + id + "\"");
    if (was_correct) ++clean_correct;
    const bool noisy_wrong = !it->second;
    if (formula == AsrFormula::Restricted) {
      if (was_correct && noisy_wrong) ++numerator;
    } else {
      if (noisy_wrong) ++numerator;
    }
  }
  if (clean_correct == 0) return std::nullopt;
  return static_cast<double>(numerator) / static_cast<double>(clean_correct);
}

std::pair<double, double> aggregate_groups(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("cannot aggregate zero groups");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

std::vector<MetricRow> compute_metric_rows(
    const std::string& model, const std::string& dataset,
    const std::vector<Prediction>& clean_predictions,
    const std::map<std::string, std::vector<Prediction>>& noisy_by_condition,
    AsrFormula formula) {
  if (clean_predictions.empty()) throw ValidationError("no clean predictions");
  const auto universe = question_universe(clean_predictions);
  const GroupGrid clean_grid = index_groups(clean_predictions);

  std::vector<MetricRow> rows;
  for (const auto& [n, groups] : clean_grid) {
    std::vector<double> accs;
    for (const auto& [g, preds] : groups) accs.push_back(accuracy(preds, universe));
    auto [mean, sd] = aggregate_groups(accs);
    MetricRow row;
    row.model = model;
    row.dataset = dataset;
    row.condition = "clean";
    row.n = n;
    row.acc_mean = mean;
    row.acc_std = sd;
    row.group_count = static_cast<int>(accs.size());
    rows.push_back(std::move(row));
  }

  for (const auto& [condition, predictions] : noisy_by_condition) {
    if (condition == "clean")
      throw ValidationError("noisy condition cannot be named \"clean\"");
    const GroupGrid grid = index_groups(predictions);
    for (const auto& [n, groups] : grid) {
      auto clean_n = clean_grid.find(n);
      if (clean_n == clean_grid.end())
        throw ValidationError("condition \"" + condition + "\" has n=" + std::to_string(n) +
                              " but the clean run does not");
      std::vector<double> accs;
      std::vector<double> asrs;
      for (const auto& [g, preds] : groups) {
        auto clean_g = clean_n->second.find(g);
        if (clean_g == clean_n->second.end())
          throw ValidationError("condition \"" + condition + "\" n=" + std::to_string(n) +
                                " has group " + std::to_string(g) +
                                " with no clean counterpart");
        accs.push_back(accuracy(preds, universe));
        if (auto asr = attack_success_rate(clean_g->second, preds, formula))
          asrs.push_back(*asr);
      }
      auto [mean, sd] = aggregate_groups(accs);
      MetricRow row;
      row.model = model;
      row.dataset = dataset;
      row.condition = condition;
      row.n = n;
      row.acc_mean = mean;
      row.acc_std = sd;
      row.group_count = static_cast<int>(accs.size());
      if (!asrs.empty()) {
        auto [amean, asd] = aggregate_groups(asrs);
        row.asr_mean = amean;
        row.asr_std = asd;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

static const char* kMetricsHeader =
    "model,dataset,condition,n,acc_mean,acc_std,asr_mean,asr_std,group_count";

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const MetricRow& r : rows) {
    out << r.model << ',' << r.dataset << ',' << r.condition << ',' << r.n << ','
        << shortest_double(r.acc_mean) << ',' << shortest_double(r.acc_std) << ','
        << (r.asr_mean ? shortest_double(*r.asr_mean) : "") << ','
        << (r.asr_std ? shortest_double(*r.asr_std) : "") << ','
        << r.group_count << '\n';
  }
  write_file(path, out.str());
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  const std::string content = read_file(path);
  std::vector<MetricRow> rows;
  std::istringstream in(content);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string context = path + ":" + std::to_string(lineno);
    if (lineno == 1) {
      if (line != kMetricsHeader)
        throw ValidationError(context + ": unexpected metrics header \"" + line + "\"");
      continue;
    }
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') fields.push_back(std::exchange(cur, std::string()));
      else cur.push_back(c);
    }
    fields.push_back(cur);
    if (fields.size() != 9)
      throw ValidationError(context + ": expected 9 fields, got " +
                            std::to_string(fields.size()));
    MetricRow r;
    r.model = fields[0];
    r.dataset = fields[1];
    r.condition = fields[2];
    r.n = parse_int(fields[3], context);
    r.acc_mean = parse_double(fields[4], context);
    r.acc_std = parse_double(fields[5], context);
    if (!fields[6].empty()) r.asr_mean = parse_double(fields[6], context);
    if (!fields[7].empty()) r.asr_std = parse_double(fields[7], context);
    r.group_count = parse_int(fields[8], context);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError(path + ": no metric rows");
  return rows;
}

}  // namespace pforest
