#include "pforest/corpus.hpp"

#include <sstream>

#include "pforest/errors.hpp"
#include "pforest/extraction.hpp"
#include "pforest/jsonl.hpp"

namespace pforest {

const char* to_string(Dataset d) {
  switch (d) {
    case Dataset::Gsm8k: return "gsm8k";
    case Dataset::Math: return "math";
    case Dataset::MmluMath: return "mmlu_math";
    case Dataset::MultiArith: return "multiarith";
  }
  return "?";
}

std::optional<Dataset> parse_dataset(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "gsm8k") return Dataset::Gsm8k;
  if (lower == "math") return Dataset::Math;
  if (lower == "mmlu_math" || lower == "mmlu-math" || lower == "mmlu") return Dataset::MmluMath;
  if (lower == "multiarith" || lower == "multi_arith") return Dataset::MultiArith;
  return std::nullopt;
}

AnswerKind answer_kind_for(Dataset d) {
  return d == Dataset::MmluMath ? AnswerKind::Choice : AnswerKind::Numeric;
}

Corpus::Corpus(Dataset dataset, std::vector<Question> questions)
    : dataset_(dataset), questions_(std::move(questions)) {
  for (size_t i = 0; i < questions_.size(); ++i) {
    auto [it, inserted] = by_id_.emplace(questions_[i].id, i);
    if (!inserted) throw ValidationError("duplicate question id \"" + questions_[i].id + "\"");
  }
}

const Question* Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &questions_[it->second];
}

Corpus load_corpus(const std::string& path, Dataset dataset) {
  std::vector<Question> questions;
  const AnswerKind kind = answer_kind_for(dataset);
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    const std::string context = path + ":" + std::to_string(lineno);
    Question q;
    q.id = require_string(obj, "id", context);
    q.text = require_string(obj, "text", context);
    q.gold = require_string(obj, "gold", context);
    q.dataset = dataset;
    q.answer_kind = kind;
    if (q.id.empty()) throw ValidationError(context + ": empty id");
    if (q.text.empty()) throw ValidationError(context + ": empty text");
    questions.push_back(std::move(q));
  });
  if (questions.empty()) throw ValidationError(path + ": corpus is empty");
  return Corpus(dataset, std::move(questions));
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ostringstream out;
  for (const Question& q : corpus.questions()) {
    json obj{{"id", q.id}, {"text", q.text}, {"gold", q.gold}};
    out << obj.dump() << '\n';
  }
  write_file(path, out.str());
}

bool validate_gold(const Question& q) {
  return canonicalize(q.gold, q.answer_kind).parseable();
}

}  // namespace pforest
