#include "pforest/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <numeric>

#include "pforest/errors.hpp"

namespace pforest {
namespace {

bool ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

std::string lowered(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool in_space = false;
  for (char c : trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

/// Content of the brace group starting at s[open] == '{'. If the group never
/// closes (truncated completion), the rest of the string is returned.
std::string balanced_brace_content(std::string_view s, size_t open) {
  int depth = 0;
  for (size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    else if (s[i] == '}' && --depth == 0)
      return std::string(s.substr(open + 1, i - open - 1));
  }
  return std::string(s.substr(open + 1));
}

std::optional<std::string> last_boxed_content(std::string_view text) {
  size_t pos = std::string_view::npos;
  size_t from = 0;
  while (true) {
    size_t hit = text.find("\\boxed", from);
    if (hit == std::string_view::npos) break;
    pos = hit;
    from = hit + 6;
  }
  if (pos == std::string_view::npos) return std::nullopt;
  size_t open = pos + 6;
  while (open < text.size() && std::isspace(static_cast<unsigned char>(text[open]))) ++open;
  if (open >= text.size() || text[open] != '{') return std::nullopt;
  return balanced_brace_content(text, open);
}

/// Rest of the line following the last occurrence of `marker` (ASCII
/// case-insensitive) that has any content before the newline.
std::optional<std::string> last_marker_tail(std::string_view text, std::string_view marker) {
  const std::string hay = lowered(text);
  std::vector<size_t> hits;
  for (size_t from = 0;;) {
    size_t hit = hay.find(marker, from);
    if (hit == std::string::npos) break;
    hits.push_back(hit);
    from = hit + 1;
  }
  for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
    size_t start = *it + marker.size();
    size_t eol = text.find('\n', start);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view tail = trim(text.substr(start, eol - start));
    if (!tail.empty()) return std::string(tail);
  }
  return std::nullopt;
}

// --- wrapper stripping -----------------------------------------------------

void erase_all(std::string& s, std::string_view needle) {
  for (size_t hit; (hit = s.find(needle)) != std::string::npos;)
    s.erase(hit, needle.size());
}

/// Drops \text{...} / \mbox{...} groups (including their content: they carry
/// units, not values) and cosmetic LaTeX tokens.
void strip_latex_noise(std::string& s) {
  for (const char* cmd : {"\\text", "\\mbox"}) {
    while (true) {
      size_t hit = s.find(cmd);
      if (hit == std::string::npos) break;
      size_t open = hit + std::string_view(cmd).size();
      while (open < s.size() && std::isspace(static_cast<unsigned char>(s[open]))) ++open;
      if (open >= s.size() || s[open] != '{') {
        s.erase(hit, std::string_view(cmd).size());
        continue;
      }
      int depth = 0;
      size_t close = open;
      for (; close < s.size(); ++close) {
        if (s[close] == '{') ++depth;
        else if (s[close] == '}' && --depth == 0) break;
      }
      s.replace(hit, std::min(close + 1, s.size()) - hit, " ");
    }
  }
  erase_all(s, "\\left");
  erase_all(s, "\\right");
  erase_all(s, "\\!");
  erase_all(s, "\\,");
  erase_all(s, "\\;");
  erase_all(s, "\\ ");
}

/// Peels math-mode wrappers until the string stops changing: \boxed{...},
/// $...$, \(...\), \[...\], one redundant outer brace group.
std::string strip_wrappers(std::string_view candidate) {
  std::string s(trim(candidate));
  while (true) {
    const std::string before = s;
    std::string_view v = trim(s);
    s.assign(v.data(), v.size());
    if (s.rfind("\\boxed", 0) == 0) {
      size_t open = 6;
      while (open < s.size() && std::isspace(static_cast<unsigned char>(s[open]))) ++open;
      if (open < s.size() && s[open] == '{') s = balanced_brace_content(s, open);
    }
    erase_all(s, "$");
    if (s.size() >= 4 && s.rfind("\\(", 0) == 0 && s.compare(s.size() - 2, 2, "\\)") == 0)
      s = s.substr(2, s.size() - 4);
    if (s.size() >= 4 && s.rfind("\\[", 0) == 0 && s.compare(s.size() - 2, 2, "\\]") == 0)
      s = s.substr(2, s.size() - 4);
    strip_latex_noise(s);
    if (s.size() >= 2 && s.front() == '{' && s.back() == '}') {
      // only strip when the outer braces are one balanced group
      int depth = 0;
      bool one_group = true;
      for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        else if (s[i] == '}' && --depth == 0 && i + 1 != s.size()) { one_group = false; break; }
      }
      if (one_group && depth == 0) s = s.substr(1, s.size() - 2);
    }
    if (s == before) break;
  }
  return s;
}

void replace_unicode_minus(std::string& s) {
  // U+2212 MINUS SIGN, as produced by LaTeX-ish model output.
  for (size_t hit; (hit = s.find("\xe2\x88\x92")) != std::string::npos;)
    s.replace(hit, 3, "-");
}

// --- \frac rewriting --------------------------------------------------------

std::string convert_fracs(std::string s);

/// Reads one \frac argument at s[i]: either a brace group or a single char.
/// Returns the converted argument and advances i past it; nullopt on malformed
/// input.
std::optional<std::string> read_frac_arg(const std::string& s, size_t& i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  if (i >= s.size()) return std::nullopt;
  if (s[i] == '{') {
    int depth = 0;
    for (size_t j = i; j < s.size(); ++j) {
      if (s[j] == '{') ++depth;
      else if (s[j] == '}' && --depth == 0) {
        std::string inner = s.substr(i + 1, j - i - 1);
        i = j + 1;
        return convert_fracs(std::move(inner));
      }
    }
    return std::nullopt;
  }
  std::string one(1, s[i]);
  ++i;
  return one;
}

std::string convert_fracs(std::string s) {
  static const char* kCmds[] = {"\\dfrac", "\\tfrac", "\\cfrac", "\\frac"};
  while (true) {
    size_t hit = std::string::npos;
    size_t cmd_len = 0;
    for (const char* cmd : kCmds) {
      size_t h = s.find(cmd);
      if (h != std::string::npos && (hit == std::string::npos || h < hit)) {
        hit = h;
        cmd_len = std::string_view(cmd).size();
      }
    }
    if (hit == std::string::npos) return s;
    size_t i = hit + cmd_len;
    auto num = read_frac_arg(s, i);
    if (!num) return s;
    auto den = read_frac_arg(s, i);
    if (!den) return s;
    s.replace(hit, i - hit, *num + "/" + *den);
  }
}

/// Removes digit-group separators: a comma with a digit before it and exactly
/// three digits after it (not followed by a fourth).
void strip_thousands_separators(std::string& s) {
  for (size_t i = 0; i < s.size();) {
    const bool sep = s[i] == ',' && i > 0 && ascii_digit(s[i - 1]) &&
                     i + 3 < s.size() && ascii_digit(s[i + 1]) &&
                     ascii_digit(s[i + 2]) && ascii_digit(s[i + 3]) &&
                     (i + 4 >= s.size() || !ascii_digit(s[i + 4]));
    if (sep) {
      s.erase(i, 1);
      i = i >= 4 ? i - 4 : 0;  // re-check earlier separators ("12,345,678")
    } else {
      ++i;
    }
  }
}

std::vector<std::string> split_top_level_commas(const std::string& s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(' || c == '{' || c == '[') ++depth;
    else if (c == ')' || c == '}' || c == ']') --depth;
    if (c == ',' && depth <= 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

// --- exact number parsing ---------------------------------------------------

int64_t gcd64(int64_t a, int64_t b) { return std::gcd(a < 0 ? -a : a, b < 0 ? -b : b); }

Rational reduce(Rational r) {
  if (r.den < 0) { r.num = -r.num; r.den = -r.den; }
  int64_t g = gcd64(r.num, r.den);
  if (g > 1) { r.num /= g; r.den /= g; }
  return r;
}

std::optional<int64_t> parse_int64(std::string_view digits) {
  if (digits.empty() || digits.size() > 18) return std::nullopt;
  int64_t v = 0;
  for (char c : digits) {
    if (!ascii_digit(c)) return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return v;
}

/// Exact decimal string for a rational whose reduced denominator is a product
/// of 2s and 5s (i.e. the expansion terminates). Used to give every decimal
/// answer one canonical spelling: "2.250" and "2.25" both print as "2.25".
std::string decimal_string(Rational r) {
  std::string out;
  if (r.num < 0) out.push_back('-');
  uint64_t num = static_cast<uint64_t>(r.num < 0 ? -r.num : r.num);
  uint64_t den = static_cast<uint64_t>(r.den);
  out += std::to_string(num / den);
  uint64_t rem = num % den;
  if (rem == 0) return out;
  out.push_back('.');
  for (int guard = 0; rem != 0 && guard < 40; ++guard) {
    rem *= 10;
    out.push_back(static_cast<char>('0' + rem / den));
    rem %= den;
  }
  return out;
}

bool nonterminating(const Rational& r) {
  int64_t d = r.den;
  while (d % 2 == 0) d /= 2;
  while (d % 5 == 0) d /= 5;
  return d > 1;
}

struct ParsedNumber {
  Rational value;
  bool from_fraction{false};
};

/// [+-]? digits [. digits] | [+-]? digits / digits, whole-string match,
/// spaces allowed around '/' and after the sign.
std::optional<ParsedNumber> parse_exact_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  size_t i = 0;
  bool neg = false;
  if (s[i] == '+' || s[i] == '-') {
    neg = s[i] == '-';
    ++i;
    while (i < s.size() && s[i] == ' ') ++i;
  }
  size_t int_begin = i;
  while (i < s.size() && ascii_digit(s[i])) ++i;
  std::string_view int_digits = s.substr(int_begin, i - int_begin);

  if (i < s.size() && s[i] == '.') {
    ++i;
    size_t frac_begin = i;
    while (i < s.size() && ascii_digit(s[i])) ++i;
    std::string_view frac_digits = s.substr(frac_begin, i - frac_begin);
    if (i != s.size() || frac_digits.empty()) return std::nullopt;
    if (int_digits.size() + frac_digits.size() > 18) return std::nullopt;
    std::string all(int_digits);
    all += frac_digits;
    auto num = parse_int64(all.empty() ? "0" : all);
    if (!num) return std::nullopt;
    int64_t den = 1;
    for (size_t k = 0; k < frac_digits.size(); ++k) den *= 10;
    Rational r = reduce({neg ? -*num : *num, den});
    return ParsedNumber{r, false};
  }

  if (int_digits.empty()) return std::nullopt;

  size_t j = i;
  while (j < s.size() && s[j] == ' ') ++j;
  if (j < s.size() && s[j] == '/') {
    ++j;
    while (j < s.size() && s[j] == ' ') ++j;
    size_t den_begin = j;
    while (j < s.size() && ascii_digit(s[j])) ++j;
    std::string_view den_digits = s.substr(den_begin, j - den_begin);
    if (j != s.size() || den_digits.empty()) return std::nullopt;
    auto num = parse_int64(int_digits);
    auto den = parse_int64(den_digits);
    if (!num || !den || *den == 0) return std::nullopt;
    Rational r = reduce({neg ? -*num : *num, *den});
    return ParsedNumber{r, true};
  }

  if (i != s.size()) return std::nullopt;
  auto num = parse_int64(int_digits);
  if (!num) return std::nullopt;
  return ParsedNumber{{neg ? -*num : *num, 1}, false};
}

AnswerPart numeric_part(const ParsedNumber& p) {
  AnswerPart part;
  part.number = p.value;
  if (p.value.den == 1) {
    part.kind = CanonicalKind::Decimal;
    part.value = std::to_string(p.value.num);
  } else if (p.from_fraction) {
    part.kind = CanonicalKind::Rational;
    part.value = std::to_string(p.value.num) + "/" + std::to_string(p.value.den);
  } else {
    part.kind = CanonicalKind::Decimal;
    part.value = decimal_string(p.value);
  }
  return part;
}

std::vector<std::string> space_tokens(std::string_view s) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) toks.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) toks.push_back(std::move(cur));
  return toks;
}

bool unit_like(const std::string& tok) {
  if (tok.empty()) return false;
  for (char c : tok)
    if (!ascii_alpha(c) && c != '-' && c != '.') return false;
  return true;
}

std::string join(const std::vector<std::string>& toks, size_t count) {
  std::string out;
  for (size_t i = 0; i < count; ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

/// One comma-separated piece of a numeric answer -> part, or nullopt when the
/// piece is blank.
std::optional<AnswerPart> parse_numeric_piece(std::string_view piece) {
  std::string s(trim(piece));
  // markdown emphasis, percent signs, sentence-final periods
  erase_all(s, "*");
  erase_all(s, "`");
  erase_all(s, "%");
  while (!s.empty() && s.back() == '.') s.pop_back();
  std::string_view t = trim(s);
  s.assign(t.data(), t.size());
  if (s.empty()) return std::nullopt;

  if (auto exact = parse_exact_number(s)) return numeric_part(*exact);

  // "12 dollars", "twenty-one points": numeric prefix + unit words
  const auto toks = space_tokens(s);
  for (size_t k = toks.size(); k >= 1; --k) {
    bool rest_units = true;
    for (size_t r = k; r < toks.size(); ++r)
      if (!unit_like(toks[r])) { rest_units = false; break; }
    if (!rest_units) continue;
    const std::string prefix = join(toks, k);
    if (auto exact = parse_exact_number(prefix)) return numeric_part(*exact);
    if (auto words = parse_number_words(prefix)) {
      AnswerPart part;
      part.kind = CanonicalKind::Decimal;
      part.number = Rational{*words, 1};
      part.value = std::to_string(*words);
      return part;
    }
  }

  AnswerPart part;
  part.kind = CanonicalKind::Text;
  part.value = collapse_spaces(s);
  if (part.value.empty()) return std::nullopt;
  return part;
}

std::optional<char> find_choice_letter(std::string_view s) {
  std::string t(trim(s));
  erase_all(t, "*");
  while (!t.empty() && (t.back() == '.' || t.back() == ':')) t.pop_back();
  std::string_view v = trim(t);

  auto ok = [](char c) {
    char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return (u >= 'A' && u <= 'D') ? std::optional<char>(u) : std::nullopt;
  };

  if (v.size() == 1) return ok(v[0]);
  if (v.size() == 3 && v[0] == '(' && v[2] == ')') return ok(v[1]);
  if (v.size() >= 2 && !ascii_alpha(v[1]) && !ascii_digit(v[1]))
    if (auto c = ok(v[0])) return c;
  // last "(X)" anywhere in the span
  std::optional<char> found;
  for (size_t i = 0; i + 2 < v.size(); ++i)
    if (v[i] == '(' && v[i + 2] == ')')
      if (auto c = ok(v[i + 1])) found = c;
  return found;
}

}  // namespace

const char* to_string(CanonicalKind k) {
  switch (k) {
    case CanonicalKind::Rational: return "rational";
    case CanonicalKind::Decimal: return "decimal";
    case CanonicalKind::Choice: return "choice";
    case CanonicalKind::Text: return "text";
    case CanonicalKind::Unparseable: return "unparseable";
  }
  return "?";
}

std::optional<CanonicalKind> parse_canonical_kind(std::string_view name) {
  if (name == "rational") return CanonicalKind::Rational;
  if (name == "decimal") return CanonicalKind::Decimal;
  if (name == "choice") return CanonicalKind::Choice;
  if (name == "text") return CanonicalKind::Text;
  if (name == "unparseable") return CanonicalKind::Unparseable;
  return std::nullopt;
}

CanonicalAnswer CanonicalAnswer::from_parts(std::vector<AnswerPart> parts) {
  CanonicalAnswer a;
  a.parts_ = std::move(parts);
  return a;
}

CanonicalKind CanonicalAnswer::kind() const {
  return parts_.empty() ? CanonicalKind::Unparseable : parts_.front().kind;
}

std::string CanonicalAnswer::value() const {
  std::string out;
  for (size_t i = 0; i < parts_.size(); ++i) {
    if (i) out.push_back(',');
    out += parts_[i].value;
  }
  return out;
}

std::optional<std::string> extract_final_answer(std::string_view raw_text, AnswerKind) {
  if (auto boxed = last_boxed_content(raw_text)) return boxed;
  if (auto tail = last_marker_tail(raw_text, "final answer is")) return tail;
  if (auto tail = last_marker_tail(raw_text, "answer:")) return tail;
  return std::nullopt;
}

CanonicalAnswer canonicalize(std::string_view candidate, AnswerKind kind) {
  std::string s = strip_wrappers(candidate);
  if (kind == AnswerKind::Choice) {
    if (auto letter = find_choice_letter(s)) {
      AnswerPart part;
      part.kind = CanonicalKind::Choice;
      part.value = std::string(1, *letter);
      return CanonicalAnswer::from_parts({std::move(part)});
    }
    return CanonicalAnswer::unparseable();
  }

  replace_unicode_minus(s);
  s = convert_fracs(std::move(s));
  strip_thousands_separators(s);

  std::vector<AnswerPart> parts;
  for (const std::string& piece : split_top_level_commas(s))
    if (auto part = parse_numeric_piece(piece)) parts.push_back(std::move(*part));
  if (parts.empty()) return CanonicalAnswer::unparseable();
  return CanonicalAnswer::from_parts(std::move(parts));
}

CanonicalAnswer extract_and_canonicalize(std::string_view raw_text, AnswerKind kind) {
  auto candidate = extract_final_answer(raw_text, kind);
  if (!candidate) return CanonicalAnswer::unparseable();
  return canonicalize(*candidate, kind);
}

namespace {

bool parts_equal(const AnswerPart& a, const AnswerPart& b) {
  const bool a_num = a.number.has_value();
  const bool b_num = b.number.has_value();
  if (a_num != b_num) return false;
  if (a_num) {
    const Rational& x = *a.number;
    const Rational& y = *b.number;
    if (static_cast<__int128>(x.num) * y.den == static_cast<__int128>(y.num) * x.den)
      return true;
    if (nonterminating(x) || nonterminating(y)) {
      const double dx = static_cast<double>(x.num) / static_cast<double>(x.den);
      const double dy = static_cast<double>(y.num) / static_cast<double>(y.den);
      const double scale = std::max(std::abs(dx), std::abs(dy));
      return std::abs(dx - dy) <= 1e-6 * scale;
    }
    return false;
  }
  return a.kind == b.kind && a.value == b.value;
}

}  // namespace

bool answers_equal(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  if (!a.parseable() || !b.parseable()) return false;
  if (a.parts().size() != b.parts().size()) return false;
  std::vector<bool> used(b.parts().size(), false);
  for (const AnswerPart& pa : a.parts()) {
    bool matched = false;
    for (size_t i = 0; i < b.parts().size(); ++i) {
      if (used[i]) continue;
      if (parts_equal(pa, b.parts()[i])) {
        used[i] = true;
        matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

namespace {

std::optional<int64_t> word_value(const std::string& w) {
  static const std::pair<const char*, int64_t> kUnits[] = {
      {"zero", 0},     {"one", 1},       {"two", 2},       {"three", 3},
      {"four", 4},     {"five", 5},      {"six", 6},       {"seven", 7},
      {"eight", 8},    {"nine", 9},      {"ten", 10},      {"eleven", 11},
      {"twelve", 12},  {"thirteen", 13}, {"fourteen", 14}, {"fifteen", 15},
      {"sixteen", 16}, {"seventeen", 17}, {"eighteen", 18}, {"nineteen", 19}};
  for (const auto& [word, value] : kUnits)
    if (w == word) return value;
  return std::nullopt;
}

std::optional<int64_t> tens_value(const std::string& w) {
  static const std::pair<const char*, int64_t> kTens[] = {
      {"twenty", 20}, {"thirty", 30}, {"forty", 40},  {"fifty", 50},
      {"sixty", 60},  {"seventy", 70}, {"eighty", 80}, {"ninety", 90}};
  for (const auto& [word, value] : kTens)
    if (w == word) return value;
  return std::nullopt;
}

/// number below 1000: "five", "nineteen", "forty two", "three hundred five"
std::optional<int64_t> parse_below_thousand(const std::vector<std::string>& toks,
                                            size_t& i) {
  if (i >= toks.size()) return std::nullopt;
  int64_t total = 0;
  bool any = false;

  if (auto u = word_value(toks[i]); u && *u >= 1 && *u <= 9 &&
                                    i + 1 < toks.size() && toks[i + 1] == "hundred") {
    total = *u * 100;
    i += 2;
    any = true;
  }

  if (i < toks.size()) {
    if (auto t = tens_value(toks[i])) {
      total += *t;
      ++i;
      any = true;
      if (i < toks.size())
        if (auto u = word_value(toks[i]); u && *u >= 1 && *u <= 9) {
          total += *u;
          ++i;
        }
    } else if (auto u = word_value(toks[i]); u && !(any && *u == 0)) {
      total += *u;
      ++i;
      any = true;
    }
  }
  return any ? std::optional<int64_t>(total) : std::nullopt;
}

}  // namespace

std::optional<int64_t> parse_number_words(std::string_view text) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : text) {
    if (ascii_alpha(c)) {
      cur.push_back(ascii_lower(c));
    } else if (c == '-' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) toks.push_back(std::move(cur)), cur.clear();
    } else {
      return std::nullopt;  // digits or punctuation: not a spelled-out number
    }
  }
  if (!cur.empty()) toks.push_back(std::move(cur));
  std::erase(toks, std::string("and"));
  if (toks.empty()) return std::nullopt;

  size_t i = 0;
  int64_t total = 0;
  bool any = false;

  auto scaled_group = [&](const char* scale_word, int64_t scale) -> bool {
    size_t save = i;
    if (auto head = parse_below_thousand(toks, i)) {
      if (i < toks.size() && toks[i] == scale_word) {
        ++i;
        total += *head * scale;
        any = true;
        return true;
      }
    }
    i = save;
    return false;
  };

  scaled_group("million", 1000000);
  scaled_group("thousand", 1000);
  if (auto tail = parse_below_thousand(toks, i)) {
    total += *tail;
    any = true;
  }
  if (!any || i != toks.size()) return std::nullopt;
  return total;
}

}  // namespace pforest
