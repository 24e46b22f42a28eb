#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pforest/corpus.hpp"

namespace pforest {

enum class NoiseKind { Clean, Punct, WikiTypo, Ata, Preloaded };

const char* to_string(NoiseKind k);
std::optional<NoiseKind> parse_noise_kind(std::string_view name);

/// Parameters of one noise condition. Fields beyond `kind` and `seed` apply
/// to specific kinds: `intensity` to Punct, `rate` to WikiTypo, `word_budget`
/// to Ata.
struct NoiseSpec {
  NoiseKind kind{NoiseKind::Clean};
  double intensity{0.0};
  uint64_t seed{0};
  double rate{1.0};
  int word_budget{0};
};

/// Condition column label: "clean", "punct10"/"punct30"/"punct50" (or
/// "punct<pct>" for other rates), "wikitypo", "ata", "r2ata" for preloaded.
std::string condition_label(const NoiseSpec& spec);

enum class EditOp { Insert, Substitute, Delete, Duplicate, RemoveSpace, ReplaceWord };

const char* to_string(EditOp op);
std::optional<EditOp> parse_edit_op(std::string_view name);

/// One splice against the ORIGINAL text: at byte offset `position`, the bytes
/// `original` are consumed and `replacement` is emitted instead. Pure
/// insertions have empty `original`; pure deletions an empty `replacement`.
/// An edit list plus the perturbed text is a complete provenance record: the
/// original is recoverable byte for byte.
struct Edit {
  EditOp op{};
  size_t position{0};
  std::string original;
  std::string replacement;
};

struct PerturbedQuestion {
  std::string base_id;
  NoiseSpec spec;
  std::string text;
  std::vector<Edit> edits;
};

/// Typo dictionary: case-folded word -> misspelling variants. The loader
/// drops variants identical to the word and variants containing digits, so
/// substitutions never touch the numbers an answer depends on.
struct TypoDictionary {
  std::map<std::string, std::vector<std::string>> entries;

  static TypoDictionary load(const std::string& path);
};

struct WordSpan {
  size_t begin{0};
  size_t end{0};  // one past the last byte
};

/// Maximal runs of non-whitespace bytes, in order.
std::vector<WordSpan> split_words(std::string_view text);

/// Number of punctuation marks inserted into a text of `word_count` words at
/// the given intensity: round(intensity * word_count), half away from zero.
size_t punct_insertion_count(double intensity, size_t word_count);

/// Seeded plan for punctuation insertion: `count` edits, each inserting one
/// of . , ! ? ; : as its own space-delimited token at an inter-word boundary.
/// Boundaries are drawn without replacement first; once all are used, extra
/// marks land on boundaries drawn with replacement. Edits come back sorted by
/// position (stable in draw order).
std::vector<Edit> plan_punct_insertions(std::string_view text, double intensity,
                                        uint64_t seed);

/// Applies edits (sorted by position, non-overlapping) to `text`. Throws
/// ValidationError on out-of-range positions, overlapping spans, or when an
/// edit's `original` does not match the text.
std::string apply_edits(std::string_view text, const std::vector<Edit>& edits);

/// Exact inverse of apply_edits: reconstructs the original text, verifying
/// each edit's `replacement` against the perturbed bytes.
std::string undo_edits(std::string_view perturbed, const std::vector<Edit>& edits);

PerturbedQuestion perturb_punct(const Question& q, double intensity, uint64_t seed);

PerturbedQuestion perturb_wikitypo(const Question& q, const TypoDictionary& dict,
                                   uint64_t seed, double rate = 1.0);

/// Deterministic importance ranking used to pick adversarial typo targets:
/// content words (alphabetic core, length >= 3, not a stopword) score above
/// function words; words containing digits sink to the bottom so numeric
/// facts are never corrupted. Returns (word_index, score) sorted by score
/// descending, position ascending on ties.
std::vector<std::pair<size_t, double>> score_word_importance(std::string_view text);

/// Adversarial typos: the `word_budget` highest-ranked perturbable words each
/// receive one character-level corruption (letter duplication, QWERTY-adjacent
/// substitution or insertion, deletion, or joining with the next word), i.e.
/// Levenshtein distance exactly 1 per affected span. A budget larger than the
/// number of perturbable words is clamped (callers may warn; not an error).
PerturbedQuestion perturb_ata(const Question& q, int word_budget, uint64_t seed);

/// Pre-generated adversarial texts keyed by base question id. Every record
/// must reference a known id; perturbed text equal to the clean text is
/// accepted. Records come back in file order.
std::vector<PerturbedQuestion> load_preperturbed(const std::string& path, const Corpus& base);

void write_perturbed(const std::string& path, const std::vector<PerturbedQuestion>& items);
std::vector<PerturbedQuestion> read_perturbed(const std::string& path);

}  // namespace pforest
