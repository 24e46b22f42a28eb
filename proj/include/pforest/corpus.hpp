#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pforest {

enum class Dataset { Gsm8k, Math, MmluMath, MultiArith };
enum class AnswerKind { Numeric, Choice };

const char* to_string(Dataset d);
std::optional<Dataset> parse_dataset(std::string_view name);

/// Multiple-choice grading applies only to MMLU-style items; everything else
/// is graded as a number (or tuple of numbers).
AnswerKind answer_kind_for(Dataset d);

struct Question {
  std::string id;
  Dataset dataset{};
  std::string text;
  std::string gold;
  AnswerKind answer_kind{AnswerKind::Numeric};
};

/// An ordered question set. Load order is the canonical order every
/// downstream stage (perturbation, sampling, voting) preserves.
class Corpus {
 public:
  Corpus() = default;
  Corpus(Dataset dataset, std::vector<Question> questions);

  Dataset dataset() const { return dataset_; }
  const std::vector<Question>& questions() const { return questions_; }
  size_t size() const { return questions_.size(); }

  /// nullptr when the id is unknown.
  const Question* find(std::string_view id) const;

 private:
  Dataset dataset_{};
  std::vector<Question> questions_;
  std::unordered_map<std::string, size_t> by_id_;
};

/// Reads a JSONL corpus ({"id","text","gold"} per line). Throws
/// ValidationError with file:line on malformed lines, missing fields,
/// duplicate ids, or an empty file.
Corpus load_corpus(const std::string& path, Dataset dataset);

void save_corpus(const Corpus& corpus, const std::string& path);

/// True when the gold label parses under the question's answer kind, i.e.
/// grading against it can ever succeed.
bool validate_gold(const Question& q);

}  // namespace pforest
