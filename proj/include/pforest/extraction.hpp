#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pforest/corpus.hpp"

namespace pforest {

enum class CanonicalKind { Rational, Decimal, Choice, Text, Unparseable };

const char* to_string(CanonicalKind k);
std::optional<CanonicalKind> parse_canonical_kind(std::string_view name);

/// Exact fraction in lowest terms; the sign lives on the numerator and the
/// denominator is always positive. Integers have den == 1.
struct Rational {
  int64_t num{0};
  int64_t den{1};
};

struct AnswerPart {
  CanonicalKind kind{CanonicalKind::Text};
  std::string value;                // normalized surface form
  std::optional<Rational> number;   // set for Rational and Decimal parts
};

/// The normalized answer used for voting and grading. An unparseable answer
/// has no parts and compares unequal to everything, including itself, so it
/// can never win or join a vote.
class CanonicalAnswer {
 public:
  CanonicalAnswer() = default;

  static CanonicalAnswer unparseable() { return CanonicalAnswer(); }
  static CanonicalAnswer from_parts(std::vector<AnswerPart> parts);

  bool parseable() const { return !parts_.empty(); }
  CanonicalKind kind() const;
  const std::vector<AnswerPart>& parts() const { return parts_; }

  /// Comma-joined part values; empty for unparseable answers.
  std::string value() const;

 private:
  std::vector<AnswerPart> parts_;
};

/// Pulls the final-answer span out of a raw completion. Priority:
///   1. the last \boxed{...} (brace balanced),
///   2. the last "final answer is ..." clause,
///   3. the last "Answer: ..." line.
/// Marker search is ASCII case-insensitive. nullopt when nothing matches.
std::optional<std::string> extract_final_answer(std::string_view raw_text, AnswerKind kind);

/// Normalizes a candidate span to a canonical answer:
/// strips math-mode wrappers, rewrites \frac{a}{b} to a/b, removes thousands
/// separators, splits top-level commas into multi-part answers, converts
/// spelled-out numbers ("twenty-one") to numerals, drops trailing unit words,
/// reduces fractions, and normalizes decimals. Choice answers normalize to a
/// single letter A-D. Returns the unparseable answer when nothing survives.
CanonicalAnswer canonicalize(std::string_view candidate, AnswerKind kind);

CanonicalAnswer extract_and_canonicalize(std::string_view raw_text, AnswerKind kind);

/// Multiset equality over parts. Numeric parts compare as exact rationals
/// (9/4 == 2.25); a 1e-6 relative tolerance applies only when one side has a
/// non-terminating decimal expansion. Unparseable never equals anything.
bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b);

/// Spelled-out integer in [0, 999999999]: units, teens, hyphenated tens,
/// "hundred"/"thousand"/"million", optional "and". nullopt when the text is
/// not a pure number phrase.
std::optional<int64_t> parse_number_words(std::string_view text);

}  // namespace pforest
