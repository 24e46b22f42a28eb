#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "pforest/errors.hpp"
#include "pforest/forest.hpp"
#include "pforest/metrics.hpp"
#include "test_support.hpp"

using namespace pforest;
using testsupport::TempDir;
using testsupport::slurp;
using testsupport::write_text;

namespace {

CanonicalAnswer num(const std::string& s) { return canonicalize(s, AnswerKind::Numeric); }

Sample make_sample(const std::string& qid, const std::string& cond, int agent,
                   const std::string& answer) {
  Sample s;
  s.question_id = qid;
  s.condition = cond;
  s.agent_index = agent;
  s.raw_text = answer.empty() ? "no conclusion reached"
                              : "The final answer is \\boxed{" + answer + "}";
  s.canonical = answer.empty() ? CanonicalAnswer::unparseable() : num(answer);
  return s;
}

Prediction make_pred(const std::string& qid, const std::string& cond, int n, int g,
                     bool correct) {
  Prediction p;
  p.question_id = qid;
  p.condition = cond;
  p.n = n;
  p.group_index = g;
  p.correct = correct;
  p.answer = num(correct ? "1" : "2");
  p.vote_counts = {{p.answer.value(), n}};
  return p;
}

Question make_question(const std::string& id, const std::string& gold) {
  Question q;
  q.id = id;
  q.dataset = Dataset::Gsm8k;
  q.text = "question " + id;
  q.gold = gold;
  q.answer_kind = AnswerKind::Numeric;
  return q;
}

}  // namespace

TEST_CASE("group partition covers the reference committee sizes") {
  const std::map<int, size_t> expected = {{1, 25}, {2, 12}, {5, 5}, {10, 2},
                                          {15, 1}, {20, 1}, {25, 1}};
  for (const auto& [n, count] : expected) {
    const auto groups = partition_groups(25, n);
    CAPTURE(n);
    REQUIRE(groups.size() == count);
    // disjoint, consecutive, ascending: flattening gives 0..count*n-1
    int next = 0;
    for (const auto& g : groups) {
      CHECK(g.n == n);
      REQUIRE(g.member_indices.size() == static_cast<size_t>(n));
      for (int idx : g.member_indices) CHECK(idx == next++);
    }
    CHECK(next == static_cast<int>(count) * n);
  }
}

TEST_CASE("group partition drops the remainder and validates bounds") {
  const auto groups = partition_groups(3, 2);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].member_indices == std::vector<int>{0, 1});
  CHECK(groups[0].group_index == 0);

  CHECK_THROWS_AS(partition_groups(25, 0), ValidationError);
  CHECK_THROWS_AS(partition_groups(25, -1), ValidationError);
  CHECK_THROWS_AS(partition_groups(25, 26), ValidationError);
  CHECK_THROWS_AS(partition_groups(0, 1), ValidationError);
}

TEST_CASE("plurality vote reference cases") {
  SUBCASE("simple majority") {
    auto v = majority_vote({num("5"), num("5"), num("7")});
    CHECK(answers_equal(v.winner, num("5")));
    REQUIRE(v.counts.size() == 2);
    CHECK(v.counts[0] == std::pair<std::string, int>{"5", 2});
    CHECK(v.counts[1] == std::pair<std::string, int>{"7", 1});
  }
  SUBCASE("tie goes to the class seen first") {
    auto v = majority_vote({num("7"), num("5"), num("5"), num("7")});
    CHECK(answers_equal(v.winner, num("7")));
  }
  SUBCASE("numerically equal forms pool into one class") {
    auto v = majority_vote({num("2.25"), num("9/4"), num("3")});
    CHECK(answers_equal(v.winner, num("9/4")));
    REQUIRE(v.counts.size() == 2);
    CHECK(v.counts[0].second == 2);
  }
  SUBCASE("unparseable ballots are discarded, not counted") {
    auto v = majority_vote({CanonicalAnswer::unparseable(), num("5"),
                            CanonicalAnswer::unparseable()});
    CHECK(answers_equal(v.winner, num("5")));
    REQUIRE(v.counts.size() == 1);
    CHECK(v.counts[0].second == 1);
  }
  SUBCASE("an all-unparseable committee abstains") {
    auto v = majority_vote({CanonicalAnswer::unparseable(), CanonicalAnswer::unparseable()});
    CHECK_FALSE(v.winner.parseable());
    CHECK(v.counts.empty());
  }
  SUBCASE("empty committee is an error") {
    CHECK_THROWS_AS(majority_vote({}), ValidationError);
  }
}

TEST_CASE("vote winners match an exhaustive tally over random ballots") {
  // Pool mixes plain integers, equal fraction/decimal pairs, a word number,
  // and unparseable ballots; equivalence classes are nontrivial.
  const std::vector<std::string> pool = {"1", "2",   "9/4", "2.25",
                                         "0.5", "1/2", "three", ""};
  std::mt19937 rng(20250819);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t count = 1 + rng() % 25;
    std::vector<CanonicalAnswer> ballots;
    for (size_t i = 0; i < count; ++i) {
      const std::string& pick = pool[rng() % pool.size()];
      ballots.push_back(pick.empty() ? CanonicalAnswer::unparseable() : num(pick));
    }

    const VoteOutcome outcome = majority_vote(ballots);

    // Independent oracle: count each ballot's equivalence class by brute
    // force; the winner is the max count, earliest first occurrence.
    size_t parseable = 0;
    size_t best_count = 0;
    size_t best_index = ballots.size();
    for (size_t i = 0; i < ballots.size(); ++i) {
      if (!ballots[i].parseable()) continue;
      ++parseable;
      size_t c = 0;
      for (size_t j = 0; j < ballots.size(); ++j)
        if (ballots[j].parseable() && answers_equal(ballots[i], ballots[j])) ++c;
      if (c > best_count) {
        best_count = c;
        best_index = i;
      }
    }

    CAPTURE(trial);
    if (parseable == 0) {
      CHECK_FALSE(outcome.winner.parseable());
      CHECK(outcome.counts.empty());
    } else {
      REQUIRE(outcome.winner.parseable());
      CHECK(answers_equal(outcome.winner, ballots[best_index]));
      size_t sum = 0, max_class = 0;
      for (const auto& [value, c] : outcome.counts) {
        sum += static_cast<size_t>(c);
        max_class = std::max(max_class, static_cast<size_t>(c));
      }
      CHECK(sum == parseable);
      CHECK(max_class == best_count);
    }
  }
}

TEST_CASE("a committee grades against the gold answer") {
  std::vector<Sample> samples = {
      make_sample("q1", "clean", 0, "2.25"), make_sample("q1", "clean", 1, "9/4"),
      make_sample("q1", "clean", 2, "3"),    make_sample("q1", "clean", 3, ""),
      make_sample("q1", "clean", 4, "9/4")};
  EnsembleGroup group{5, 0, {0, 1, 2, 3, 4}};

  Prediction p = ensemble_predict(samples, group, num("9/4"));
  CHECK(p.question_id == "q1");
  CHECK(p.condition == "clean");
  CHECK(p.n == 5);
  CHECK(p.group_index == 0);
  CHECK(p.correct);  // winner 2.25 == gold 9/4
  REQUIRE(p.vote_counts.size() == 2);
  CHECK(p.vote_counts[0].second == 3);
  CHECK(p.vote_counts[1].second == 1);

  SUBCASE("wrong gold grades false") {
    CHECK_FALSE(ensemble_predict(samples, group, num("7")).correct);
  }
  SUBCASE("unparseable gold can never be matched") {
    CHECK_FALSE(ensemble_predict(samples, group, CanonicalAnswer::unparseable()).correct);
  }
  SUBCASE("missing agent index") {
    EnsembleGroup bad{2, 3, {6, 7}};
    CHECK_THROWS_WITH_AS(ensemble_predict(samples, bad, num("9/4")),
                         doctest::Contains("missing sample"), ValidationError);
  }
  SUBCASE("committees need extracted answers") {
    samples[1].canonical.reset();
    CHECK_THROWS_WITH_AS(ensemble_predict(samples, group, num("9/4")),
                         doctest::Contains("extraction"), ValidationError);
  }
}

TEST_CASE("voting the corpus produces the full grid in canonical order") {
  Corpus corpus(Dataset::Gsm8k,
                {make_question("a", "1"), make_question("b", "2")});

  std::vector<Sample> samples;
  for (const std::string& cond : {std::string("punct30"), std::string("clean")})
    for (const std::string& qid : {std::string("b"), std::string("a")})
      for (int agent = 3; agent >= 0; --agent)  // shuffled input order
        samples.push_back(make_sample(qid, cond, agent, qid == "a" ? "1" : "3"));

  const auto preds = vote_corpus(corpus, samples, {1, 2});

  // 2 conditions x (4 groups x 2 questions at n=1 + 2 groups x 2 at n=2)
  REQUIRE(preds.size() == 24);
  // condition sorted, then n as given, then corpus order, then group index
  CHECK(preds[0].condition == "clean");
  CHECK(preds[12].condition == "punct30");
  for (size_t i = 0; i < 24; i += 12) {
    CHECK(preds[i].n == 1);
    CHECK(preds[i].question_id == "a");
    CHECK(preds[i + 3].group_index == 3);
    CHECK(preds[i + 4].question_id == "b");
    CHECK(preds[i + 8].n == 2);
    CHECK(preds[i + 8].question_id == "a");
    CHECK(preds[i + 8].group_index == 0);
    CHECK(preds[i + 11].question_id == "b");
    CHECK(preds[i + 11].group_index == 1);
  }
  // grading: question a answered "1" (gold 1) everywhere, b answered "3" (gold 2)
  for (const Prediction& p : preds)
    CHECK(p.correct == (p.question_id == "a"));

  SUBCASE("samples for unknown questions are rejected") {
    samples.push_back(make_sample("zz", "clean", 0, "1"));
    CHECK_THROWS_WITH_AS(vote_corpus(corpus, samples, {1}), doctest::Contains("zz"),
                         ValidationError);
  }
  SUBCASE("a question with no samples under a condition is rejected") {
    std::vector<Sample> partial(samples.begin(), samples.begin() + 4);  // only b/punct30
    CHECK_THROWS_WITH_AS(vote_corpus(corpus, partial, {1}),
                         doctest::Contains("no samples"), ValidationError);
  }
  SUBCASE("ragged per-question sample counts are rejected") {
    samples.push_back(make_sample("a", "clean", 4, "1"));
    CHECK_THROWS_AS(vote_corpus(corpus, samples, {1}), ValidationError);
  }
  SUBCASE("an empty size list is rejected") {
    CHECK_THROWS_AS(vote_corpus(corpus, samples, {}), ValidationError);
  }
}

TEST_CASE("predictions round-trip through JSONL") {
  TempDir dir;
  std::vector<Sample> samples = {
      make_sample("q1", "clean", 0, "2.25"), make_sample("q1", "clean", 1, "9/4"),
      make_sample("q1", "clean", 2, "3"),    make_sample("q1", "clean", 3, ""),
      make_sample("q1", "clean", 4, "9/4")};
  std::vector<Prediction> preds = {
      ensemble_predict(samples, {5, 0, {0, 1, 2, 3, 4}}, num("9/4")),
      make_pred("q2", "punct10", 5, 1, false)};
  // an abstaining committee must survive the trip too
  Prediction abstain;
  abstain.question_id = "q3";
  abstain.condition = "clean";
  abstain.n = 1;
  abstain.group_index = 7;
  abstain.answer = CanonicalAnswer::unparseable();
  abstain.correct = false;
  preds.push_back(abstain);

  const std::string path = dir.file("preds.jsonl");
  write_predictions(path, preds);
  const auto back = read_predictions(path);
  REQUIRE(back.size() == preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    CHECK(back[i].question_id == preds[i].question_id);
    CHECK(back[i].condition == preds[i].condition);
    CHECK(back[i].n == preds[i].n);
    CHECK(back[i].group_index == preds[i].group_index);
    CHECK(back[i].correct == preds[i].correct);
    CHECK(back[i].answer.kind() == preds[i].answer.kind());
    CHECK(back[i].answer.value() == preds[i].answer.value());
    // counts are stored as a JSON object, so compare orderlessly
    std::map<std::string, int> got(back[i].vote_counts.begin(), back[i].vote_counts.end());
    std::map<std::string, int> want(preds[i].vote_counts.begin(), preds[i].vote_counts.end());
    CHECK(got == want);
  }
  CHECK_FALSE(back[2].answer.parseable());
}

TEST_CASE("accuracy pins the question universe") {
  const std::vector<std::string> ids = {"a", "b", "c"};
  std::vector<Prediction> group = {make_pred("a", "clean", 1, 0, true),
                                   make_pred("b", "clean", 1, 0, false),
                                   make_pred("c", "clean", 1, 0, true)};
  CHECK(accuracy(group, ids) == doctest::Approx(2.0 / 3.0));

  SUBCASE("missing question") {
    group.pop_back();
    CHECK_THROWS_AS(accuracy(group, ids), ValidationError);
  }
  SUBCASE("unknown question") {
    group.push_back(make_pred("d", "clean", 1, 0, true));
    CHECK_THROWS_AS(accuracy(group, ids), ValidationError);
  }
  SUBCASE("duplicate prediction") {
    group.push_back(make_pred("a", "clean", 1, 0, false));
    CHECK_THROWS_AS(accuracy(group, ids), ValidationError);
  }
}

TEST_CASE("attack success rate reference cases") {
  auto clean = [](bool a, bool b, bool c, bool d) {
    return std::vector<Prediction>{
        make_pred("a", "clean", 1, 0, a), make_pred("b", "clean", 1, 0, b),
        make_pred("c", "clean", 1, 0, c), make_pred("d", "clean", 1, 0, d)};
  };
  auto noisy = [](bool a, bool b, bool c, bool d) {
    // deliberately delivered in a different order: alignment is by id
    return std::vector<Prediction>{
        make_pred("d", "punct30", 1, 0, d), make_pred("c", "punct30", 1, 0, c),
        make_pred("b", "punct30", 1, 0, b), make_pred("a", "punct30", 1, 0, a)};
  };

  SUBCASE("flips among the clean-correct") {
    // clean correct {a,b,c}; noisy keeps only b
    auto r = attack_success_rate(clean(true, true, true, false),
                                 noisy(false, true, false, true));
    REQUIRE(r.has_value());
    CHECK(*r == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("literal numerator counts every noisy miss") {
    auto cg = clean(true, true, true, false);
    auto ng = noisy(false, true, false, false);
    auto lit = attack_success_rate(cg, ng, AsrFormula::Literal);
    REQUIRE(lit.has_value());
    CHECK(*lit == doctest::Approx(3.0 / 3.0));  // misses: a, c, and clean-wrong d
    // the restricted form ignores d, which was never correct to begin with
    CHECK(*attack_success_rate(cg, ng, AsrFormula::Restricted) ==
          doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("the literal form can exceed one") {
    std::vector<Prediction> cg = {make_pred("a", "clean", 1, 0, true),
                                  make_pred("b", "clean", 1, 0, false)};
    std::vector<Prediction> ng = {make_pred("a", "punct30", 1, 0, false),
                                  make_pred("b", "punct30", 1, 0, false)};
    CHECK(*attack_success_rate(cg, ng, AsrFormula::Literal) == doctest::Approx(2.0));
    CHECK(*attack_success_rate(cg, ng, AsrFormula::Restricted) == doctest::Approx(1.0));
  }
  SUBCASE("undefined when nothing was clean-correct") {
    CHECK_FALSE(attack_success_rate(clean(false, false, false, false),
                                    noisy(false, true, false, true))
                    .has_value());
  }
  SUBCASE("zero when the noise never flips a clean-correct answer") {
    auto r = attack_success_rate(clean(true, true, false, false),
                                 noisy(true, true, true, true));
    REQUIRE(r.has_value());
    CHECK(*r == doctest::Approx(0.0));
  }
  SUBCASE("id sets must match") {
    std::vector<Prediction> ng = {make_pred("a", "punct30", 1, 0, false),
                                  make_pred("zz", "punct30", 1, 0, false),
                                  make_pred("b", "punct30", 1, 0, false),
                                  make_pred("c", "punct30", 1, 0, false)};
    CHECK_THROWS_AS(attack_success_rate(clean(true, true, true, false), ng),
                    ValidationError);
  }
  SUBCASE("group sizes must match") {
    auto ng = noisy(false, true, false, true);
    ng.pop_back();
    CHECK_THROWS_AS(attack_success_rate(clean(true, true, true, false), ng),
                    ValidationError);
  }
  SUBCASE("duplicate ids are rejected") {
    auto cg = clean(true, true, true, false);
    auto ng = noisy(false, true, false, true);
    ng[0].question_id = "a";  // now a appears twice, d never
    CHECK_THROWS_AS(attack_success_rate(cg, ng), ValidationError);
  }
}

TEST_CASE("restricted rate equals an independent flip count on random patterns") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<Prediction> cg, ng;
    std::vector<bool> cok, nok;
    for (int i = 0; i < 10; ++i) {
      const std::string id = "q" + std::to_string(i);
      cok.push_back(rng() % 2 == 0);
      nok.push_back(rng() % 2 == 0);
      cg.push_back(make_pred(id, "clean", 1, 0, cok.back()));
      ng.push_back(make_pred(id, "ata", 1, 0, nok.back()));
    }
    std::shuffle(ng.begin(), ng.end(), rng);

    int clean_correct = 0, flips = 0;
    for (int i = 0; i < 10; ++i) {
      if (!cok[i]) continue;
      ++clean_correct;
      if (!nok[i]) ++flips;
    }
    const auto r = attack_success_rate(cg, ng);
    if (clean_correct == 0) {
      CHECK_FALSE(r.has_value());
    } else {
      REQUIRE(r.has_value());
      CHECK(*r == doctest::Approx(double(flips) / clean_correct));
    }
  }
}

TEST_CASE("group aggregation uses the population deviation") {
  auto [m1, s1] = aggregate_groups({0.4, 0.6});
  CHECK(m1 == doctest::Approx(0.5));
  CHECK(s1 == doctest::Approx(0.1));

  auto [m2, s2] = aggregate_groups({0.7});
  CHECK(m2 == doctest::Approx(0.7));
  CHECK(s2 == 0.0);

  auto [m3, s3] = aggregate_groups({1.0, 2.0, 3.0, 4.0});
  CHECK(m3 == doctest::Approx(2.5));
  CHECK(s3 == doctest::Approx(std::sqrt(1.25)));

  CHECK_THROWS_AS(aggregate_groups({}), ValidationError);
}

namespace {

/// Clean/noisy prediction grids for the metric-row scenario: two questions,
/// n=1 with two groups and n=2 with one.
struct Scenario {
  std::vector<Prediction> clean;
  std::map<std::string, std::vector<Prediction>> noisy;
};

Scenario reference_scenario() {
  Scenario s;
  auto add = [](std::vector<Prediction>& v, const std::string& cond, int n, int g,
                bool a_ok, bool b_ok) {
    v.push_back(make_pred("a", cond, n, g, a_ok));
    v.push_back(make_pred("b", cond, n, g, b_ok));
  };
  add(s.clean, "clean", 1, 0, true, true);    // acc 1.0
  add(s.clean, "clean", 1, 1, true, false);   // acc 0.5
  add(s.clean, "clean", 2, 0, true, true);    // acc 1.0
  auto& noisy = s.noisy["punct30"];
  add(noisy, "punct30", 1, 0, false, true);   // acc 0.5, asr 1/2
  add(noisy, "punct30", 1, 1, false, false);  // acc 0.0, asr 1/1
  add(noisy, "punct30", 2, 0, true, false);   // acc 0.5, asr 1/2
  return s;
}

const MetricRow* find_row(const std::vector<MetricRow>& rows, const std::string& cond,
                          int n) {
  for (const MetricRow& r : rows)
    if (r.condition == cond && r.n == n) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("metric rows aggregate accuracy and attack rate per condition") {
  Scenario s = reference_scenario();
  const auto rows = compute_metric_rows("toy-model", "gsm8k", s.clean, s.noisy);
  REQUIRE(rows.size() == 4);

  // clean rows first (n ascending), then noisy conditions
  CHECK(rows[0].condition == "clean");
  CHECK(rows[0].n == 1);
  CHECK(rows[1].condition == "clean");
  CHECK(rows[1].n == 2);
  CHECK(rows[2].condition == "punct30");

  const MetricRow* c1 = find_row(rows, "clean", 1);
  REQUIRE(c1 != nullptr);
  CHECK(c1->model == "toy-model");
  CHECK(c1->dataset == "gsm8k");
  CHECK(c1->acc_mean == doctest::Approx(0.75));
  CHECK(c1->acc_std == doctest::Approx(0.25));
  CHECK_FALSE(c1->asr_mean.has_value());
  CHECK(c1->group_count == 2);

  const MetricRow* c2 = find_row(rows, "clean", 2);
  REQUIRE(c2 != nullptr);
  CHECK(c2->acc_mean == doctest::Approx(1.0));
  CHECK(c2->acc_std == 0.0);
  CHECK(c2->group_count == 1);

  const MetricRow* p1 = find_row(rows, "punct30", 1);
  REQUIRE(p1 != nullptr);
  CHECK(p1->acc_mean == doctest::Approx(0.25));
  CHECK(p1->acc_std == doctest::Approx(0.25));
  REQUIRE(p1->asr_mean.has_value());
  CHECK(*p1->asr_mean == doctest::Approx(0.75));
  CHECK(*p1->asr_std == doctest::Approx(0.25));

  const MetricRow* p2 = find_row(rows, "punct30", 2);
  REQUIRE(p2 != nullptr);
  CHECK(p2->acc_mean == doctest::Approx(0.5));
  REQUIRE(p2->asr_mean.has_value());
  CHECK(*p2->asr_mean == doctest::Approx(0.5));
  CHECK(*p2->asr_std == 0.0);
}

TEST_CASE("attack rate aggregates only over groups where it is defined") {
  std::vector<Prediction> clean = {make_pred("a", "clean", 1, 0, false),
                                   make_pred("a", "clean", 1, 1, true)};
  std::map<std::string, std::vector<Prediction>> noisy;
  noisy["ata"] = {make_pred("a", "ata", 1, 0, false),
                  make_pred("a", "ata", 1, 1, false)};
  const auto rows = compute_metric_rows("m", "gsm8k", clean, noisy);
  const MetricRow* r = find_row(rows, "ata", 1);
  REQUIRE(r != nullptr);
  REQUIRE(r->asr_mean.has_value());  // group 0 undefined, group 1 = 1.0
  CHECK(*r->asr_mean == doctest::Approx(1.0));
  CHECK(*r->asr_std == 0.0);
  CHECK(r->group_count == 2);  // accuracy still aggregates both groups

  SUBCASE("fully undefined rates stay empty") {
    std::vector<Prediction> never = {make_pred("a", "clean", 1, 0, false),
                                     make_pred("a", "clean", 1, 1, false)};
    const auto rows2 = compute_metric_rows("m", "gsm8k", never, noisy);
    const MetricRow* r2 = find_row(rows2, "ata", 1);
    REQUIRE(r2 != nullptr);
    CHECK_FALSE(r2->asr_mean.has_value());
    CHECK_FALSE(r2->asr_std.has_value());
  }
}

TEST_CASE("metric row construction rejects inconsistent inputs") {
  Scenario s = reference_scenario();
  SUBCASE("a noisy condition may not be named clean") {
    std::map<std::string, std::vector<Prediction>> bad;
    bad["clean"] = s.noisy["punct30"];
    CHECK_THROWS_AS(compute_metric_rows("m", "gsm8k", s.clean, bad), ValidationError);
  }
  SUBCASE("noisy groups need a clean counterpart") {
    s.noisy["punct30"].push_back(make_pred("a", "punct30", 5, 0, true));
    s.noisy["punct30"].push_back(make_pred("b", "punct30", 5, 0, true));
    CHECK_THROWS_AS(compute_metric_rows("m", "gsm8k", s.clean, s.noisy), ValidationError);
  }
  SUBCASE("empty clean predictions") {
    CHECK_THROWS_AS(compute_metric_rows("m", "gsm8k", {}, s.noisy), ValidationError);
  }
}

TEST_CASE("metric rows round-trip through CSV byte for byte") {
  TempDir dir;
  Scenario s = reference_scenario();
  auto rows = compute_metric_rows("toy-model", "gsm8k", s.clean, s.noisy);

  const std::string path = dir.file("metrics.csv");
  write_metrics_csv(path, rows);

  const std::string text = slurp(path);
  CHECK(text.rfind("model,dataset,condition,n,acc_mean,acc_std,asr_mean,asr_std,group_count\n",
                   0) == 0);
  // the clean rows carry empty attack-rate cells
  CHECK(text.find("toy-model,gsm8k,clean,1,0.75,0.25,,,2\n") != std::string::npos);

  const auto back = read_metrics_csv(path);
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].model == rows[i].model);
    CHECK(back[i].dataset == rows[i].dataset);
    CHECK(back[i].condition == rows[i].condition);
    CHECK(back[i].n == rows[i].n);
    CHECK(back[i].acc_mean == rows[i].acc_mean);
    CHECK(back[i].acc_std == rows[i].acc_std);
    CHECK(back[i].asr_mean.has_value() == rows[i].asr_mean.has_value());
    if (rows[i].asr_mean) {
      CHECK(*back[i].asr_mean == *rows[i].asr_mean);
      CHECK(*back[i].asr_std == *rows[i].asr_std);
    }
    CHECK(back[i].group_count == rows[i].group_count);
  }

  // rewriting what was read reproduces the same bytes
  const std::string again = dir.file("metrics2.csv");
  write_metrics_csv(again, back);
  CHECK(slurp(again) == text);

  SUBCASE("a foreign header is rejected") {
    write_text(path, "model,dataset,condition\nm,d,clean\n");
    CHECK_THROWS_AS(read_metrics_csv(path), ValidationError);
  }
  SUBCASE("short rows are rejected") {
    write_text(path,
               "model,dataset,condition,n,acc_mean,acc_std,asr_mean,asr_std,group_count\n"
               "m,d,clean,1,0.5\n");
    CHECK_THROWS_AS(read_metrics_csv(path), ValidationError);
  }
}
