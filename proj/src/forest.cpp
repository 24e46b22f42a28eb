#include "pforest/forest.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "pforest/errors.hpp"
#include "pforest/jsonl.hpp"

namespace pforest {

std::vector<EnsembleGroup> partition_groups(int total, int n) {
  if (total < 1) throw ValidationError("sample total must be at least 1");
  if (n < 1) throw ValidationError("ensemble size must be at least 1");
  if (n > total)
    throw ValidationError("ensemble size " + std::to_string(n) + " exceeds sample total " +
                          std::to_string(total));
  const int group_count = total / n;
  std::vector<EnsembleGroup> groups;
  groups.reserve(static_cast<size_t>(group_count));
  for (int g = 0; g < group_count; ++g) {
    EnsembleGroup grp;
    grp.n = n;
    grp.group_index = g;
    grp.member_indices.reserve(static_cast<size_t>(n));
    for (int m = 0; m < n; ++m) grp.member_indices.push_back(g * n + m);
    groups.push_back(std::move(grp));
  }
  return groups;
}

VoteOutcome majority_vote(const std::vector<CanonicalAnswer>& answers) {
  if (answers.empty()) throw ValidationError("cannot vote over zero answers");

  struct Class {
    const CanonicalAnswer* representative;
    int count;
  };
  std::vector<Class> classes;
  for (const CanonicalAnswer& a : answers) {
    if (!a.parseable()) continue;  // an unreadable ballot joins no class
    bool merged = false;
    for (Class& c : classes) {
      if (answers_equal(*c.representative, a)) {
        ++c.count;
        merged = true;
        break;
      }
    }
    if (!merged) classes.push_back({&a, 1});
  }

  VoteOutcome out;
  if (classes.empty()) {
    out.winner = CanonicalAnswer::unparseable();
    return out;
  }
  size_t best = 0;
  for (size_t i = 1; i < classes.size(); ++i)
    if (classes[i].count > classes[best].count) best = i;  // ties keep the earlier class
  out.winner = *classes[best].representative;
  out.counts.reserve(classes.size());
  for (const Class& c : classes)
    out.counts.emplace_back(c.representative->value(), c.count);
  return out;
}

Prediction ensemble_predict(const std::vector<Sample>& question_samples,
                            const EnsembleGroup& group, const CanonicalAnswer& gold) {
  std::map<int, const Sample*> by_agent;
  for (const Sample& s : question_samples) by_agent[s.agent_index] = &s;

  std::vector<CanonicalAnswer> ballots;
  ballots.reserve(group.member_indices.size());
  Prediction p;
  for (int agent : group.member_indices) {
    auto it = by_agent.find(agent);
    if (it == by_agent.end())
      throw ValidationError("missing sample for agent index " + std::to_string(agent));
    const Sample& s = *it->second;
    if (!s.canonical)
      throw ValidationError("sample for agent " + std::to_string(agent) +
                            " has no canonical answer; run extraction first");
    ballots.push_back(*s.canonical);
    if (p.question_id.empty()) {
      p.question_id = s.question_id;
      p.condition = s.condition;
    }
  }
  VoteOutcome vote = majority_vote(ballots);
  p.n = group.n;
  p.group_index = group.group_index;
  p.answer = std::move(vote.winner);
  p.vote_counts = std::move(vote.counts);
  p.correct = gold.parseable() && answers_equal(p.answer, gold);
  return p;
}

std::vector<Prediction> vote_corpus(const Corpus& corpus, const std::vector<Sample>& samples,
                                    const std::vector<int>& n_list) {
  if (n_list.empty()) throw ValidationError("no ensemble sizes given");

  // condition -> question id -> samples
  std::map<std::string, std::map<std::string, std::vector<Sample>>> grid;
  for (const Sample& s : samples) {
    if (corpus.find(s.question_id) == nullptr)
      throw ValidationError("samples reference unknown question \"" + s.question_id + "\"");
    grid[s.condition][s.question_id].push_back(s);
  }
  if (grid.empty()) throw ValidationError("no samples to vote over");

  std::vector<Prediction> out;
  for (auto& [condition, by_question] : grid) {
    // every question must be present with one uniform sample count
    int total = -1;
    for (const Question& q : corpus.questions()) {
      auto it = by_question.find(q.id);
      if (it == by_question.end())
        throw ValidationError("condition \"" + condition + "\" has no samples for question \"" +
                              q.id + "\"");
      std::sort(it->second.begin(), it->second.end(),
                [](const Sample& a, const Sample& b) { return a.agent_index < b.agent_index; });
      const int count = static_cast<int>(it->second.size());
      if (total == -1) total = count;
      else if (count != total)
        throw ValidationError("condition \"" + condition + "\" has " + std::to_string(count) +
                              " samples for question \"" + q.id + "\" but " +
                              std::to_string(total) + " elsewhere");
    }
    for (int n : n_list) {
      const auto groups = partition_groups(total, n);
      for (const Question& q : corpus.questions()) {
        const CanonicalAnswer gold = canonicalize(q.gold, q.answer_kind);
        const auto& qsamples = by_question.at(q.id);
        for (const EnsembleGroup& g : groups)
          out.push_back(ensemble_predict(qsamples, g, gold));
      }
    }
  }
  return out;
}

void write_predictions(const std::string& path, const std::vector<Prediction>& predictions) {
  std::ostringstream out;
  for (const Prediction& p : predictions) {
    json counts = json::object();
    for (const auto& [value, count] : p.vote_counts) counts[value] = count;
    json obj{{"question_id", p.question_id},
             {"condition", p.condition},
             {"n", p.n},
             {"group_index", p.group_index},
             {"answer_kind", to_string(p.answer.kind())},
             {"answer_value", p.answer.value()},
             {"correct", p.correct},
             {"vote_counts", std::move(counts)}};
    out << obj.dump() << '\n';
  }
  write_file(path, out.str());
}

std::vector<Prediction> read_predictions(const std::string& path) {
  std::vector<Prediction> predictions;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    const std::string context = path + ":" + std::to_string(lineno);
    Prediction p;
    p.question_id = require_string(obj, "question_id", context);
    p.condition = require_string(obj, "condition", context);
    if (!obj.contains("n") || !obj["n"].is_number_integer())
      throw ValidationError(context + ": missing integer field \"n\"");
    p.n = obj["n"].get<int>();
    p.group_index = obj.value("group_index", 0);
    auto kind = parse_canonical_kind(require_string(obj, "answer_kind", context));
    if (!kind) throw ValidationError(context + ": unknown answer kind");
    const std::string value = obj.value("answer_value", std::string());
    if (*kind == CanonicalKind::Unparseable) p.answer = CanonicalAnswer::unparseable();
    else if (*kind == CanonicalKind::Choice) p.answer = canonicalize(value, AnswerKind::Choice);
    else p.answer = canonicalize(value, AnswerKind::Numeric);
    if (!obj.contains("correct") || !obj["correct"].is_boolean())
      throw ValidationError(context + ": missing boolean field \"correct\"");
    p.correct = obj["correct"].get<bool>();
    if (auto it = obj.find("vote_counts"); it != obj.end() && it->is_object())
      for (auto& [key, val] : it->items())
        p.vote_counts.emplace_back(key, val.get<int>());
    predictions.push_back(std::move(p));
  });
  if (predictions.empty()) throw ValidationError(path + ": no predictions");
  return predictions;
}

}  // namespace pforest
