#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pforest/agents.hpp"
#include "pforest/corpus.hpp"
#include "pforest/extraction.hpp"

namespace pforest {

/// One voting committee: n consecutive samples in generation order.
struct EnsembleGroup {
  int n{0};
  int group_index{0};
  std::vector<int> member_indices;  // agent indices, ascending
};

/// Splits `total` samples into floor(total/n) disjoint consecutive groups of
/// exactly n; the remainder (total mod n) is unused. With total = 25 this
/// yields 25, 12, 5, 2, 1, 1, 1 groups for n = 1, 2, 5, 10, 15, 20, 25.
/// Throws ValidationError when n < 1 or n > total.
std::vector<EnsembleGroup> partition_groups(int total, int n);

struct VoteOutcome {
  CanonicalAnswer winner;
  /// representative value string -> multiplicity, in first-seen order.
  /// Unparseable ballots never form a class.
  std::vector<std::pair<std::string, int>> counts;
};

/// Plurality vote over canonical answers. Answers join the same class when
/// answers_equal holds; the class seen earliest wins ties. All-unparseable
/// input yields an unparseable winner (counts empty). Empty input is an error.
VoteOutcome majority_vote(const std::vector<CanonicalAnswer>& answers);

struct Prediction {
  std::string question_id;
  std::string condition;
  int n{0};
  int group_index{0};
  CanonicalAnswer answer;
  std::vector<std::pair<std::string, int>> vote_counts;
  bool correct{false};
};

/// Votes one group of one question's samples against the gold answer.
/// Samples must carry canonical answers (extraction must have run).
Prediction ensemble_predict(const std::vector<Sample>& question_samples,
                            const EnsembleGroup& group, const CanonicalAnswer& gold);

/// Runs the whole grid: every question of `corpus`, every n in n_list, every
/// group. Samples must cover each corpus question with the same number of
/// agents. Output order: condition (sorted), n (as given), question (corpus
/// order), group index.
std::vector<Prediction> vote_corpus(const Corpus& corpus, const std::vector<Sample>& samples,
                                    const std::vector<int>& n_list);

/// Predictions JSONL: {"question_id","condition","n","group_index",
/// "answer_kind","answer_value","correct","vote_counts"}.
void write_predictions(const std::string& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> read_predictions(const std::string& path);

}  // namespace pforest
