#include "pforest/noise.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_set>

#include "pforest/errors.hpp"
#include "pforest/jsonl.hpp"
#include "pforest/rng.hpp"

namespace pforest {
namespace {

bool ascii_ws(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

const char kPunctSymbols[] = {'.', ',', '!', '?', ';', ':'};
constexpr size_t kPunctSymbolCount = 6;

}  // namespace

const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Clean: return "clean";
    case NoiseKind::Punct: return "punct";
    case NoiseKind::WikiTypo: return "wikitypo";
    case NoiseKind::Ata: return "ata";
    case NoiseKind::Preloaded: return "preloaded";
  }
  return "?";
}

std::optional<NoiseKind> parse_noise_kind(std::string_view name) {
  if (name == "clean") return NoiseKind::Clean;
  if (name == "punct") return NoiseKind::Punct;
  if (name == "wikitypo") return NoiseKind::WikiTypo;
  if (name == "ata") return NoiseKind::Ata;
  if (name == "preloaded" || name == "r2ata") return NoiseKind::Preloaded;
  return std::nullopt;
}

std::string condition_label(const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseKind::Clean: return "clean";
    case NoiseKind::Punct:
      return "punct" + std::to_string(std::lround(spec.intensity * 100.0));
    case NoiseKind::WikiTypo: return "wikitypo";
    case NoiseKind::Ata: return "ata";
    case NoiseKind::Preloaded: return "r2ata";
  }
  return "?";
}

const char* to_string(EditOp op) {
  switch (op) {
    case EditOp::Insert: return "insert";
    case EditOp::Substitute: return "substitute";
    case EditOp::Delete: return "delete";
    case EditOp::Duplicate: return "duplicate";
    case EditOp::RemoveSpace: return "remove_space";
    case EditOp::ReplaceWord: return "replace_word";
  }
  return "?";
}

std::optional<EditOp> parse_edit_op(std::string_view name) {
  if (name == "insert") return EditOp::Insert;
  if (name == "substitute") return EditOp::Substitute;
  if (name == "delete") return EditOp::Delete;
  if (name == "duplicate") return EditOp::Duplicate;
  if (name == "remove_space") return EditOp::RemoveSpace;
  if (name == "replace_word") return EditOp::ReplaceWord;
  return std::nullopt;
}

std::vector<WordSpan> split_words(std::string_view text) {
  std::vector<WordSpan> spans;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && ascii_ws(text[i])) ++i;
    if (i >= text.size()) break;
    size_t begin = i;
    while (i < text.size() && !ascii_ws(text[i])) ++i;
    spans.push_back({begin, i});
  }
  return spans;
}

size_t punct_insertion_count(double intensity, size_t word_count) {
  return static_cast<size_t>(std::lround(intensity * static_cast<double>(word_count)));
}

std::vector<Edit> plan_punct_insertions(std::string_view text, double intensity,
                                        uint64_t seed) {
  if (!(intensity > 0.0) || intensity > 1.0)
    throw ValidationError("punctuation intensity must be in (0, 1]");
  const auto words = split_words(text);
  if (words.empty()) throw ValidationError("cannot perturb text with no words");

  // Insertion sites are the gaps between adjacent words; a one-word text
  // falls back to its single end-of-word position.
  std::vector<size_t> sites;
  if (words.size() == 1) {
    sites.push_back(words[0].end);
  } else {
    for (size_t w = 0; w + 1 < words.size(); ++w) sites.push_back(words[w].end);
  }

  const size_t k = punct_insertion_count(intensity, words.size());
  SplitMix64 rng(seed);

  std::vector<size_t> chosen = draw_without_replacement(sites.size(), k, rng);
  while (chosen.size() < k)  // more marks than gaps: reuse sites
    chosen.push_back(static_cast<size_t>(rng.bounded(sites.size())));

  std::vector<Edit> edits;
  edits.reserve(k);
  for (size_t site : chosen) {
    const char symbol = kPunctSymbols[rng.bounded(kPunctSymbolCount)];
    Edit e;
    e.op = EditOp::Insert;
    e.position = sites[site];
    e.original.clear();
    e.replacement = std::string(" ") + symbol;  // own token: " ." etc.
    edits.push_back(std::move(e));
  }
  std::stable_sort(edits.begin(), edits.end(),
                   [](const Edit& a, const Edit& b) { return a.position < b.position; });
  return edits;
}

std::string apply_edits(std::string_view text, const std::vector<Edit>& edits) {
  std::string out;
  out.reserve(text.size() + edits.size() * 2);
  size_t cursor = 0;
  for (const Edit& e : edits) {
    if (e.position < cursor)
      throw ValidationError("edits overlap or are unsorted at byte " +
                            std::to_string(e.position));
    if (e.position > text.size() || e.position + e.original.size() > text.size())
      throw ValidationError("edit out of range at byte " + std::to_string(e.position));
    if (text.substr(e.position, e.original.size()) != e.original)
      throw ValidationError("edit original mismatch at byte " + std::to_string(e.position));
    out.append(text.substr(cursor, e.position - cursor));
    out.append(e.replacement);
    cursor = e.position + e.original.size();
  }
  out.append(text.substr(cursor));
  return out;
}

std::string undo_edits(std::string_view perturbed, const std::vector<Edit>& edits) {
  std::string out;
  out.reserve(perturbed.size());
  size_t orig_cursor = 0;   // position in the original being rebuilt
  size_t pert_cursor = 0;   // position in the perturbed input
  for (const Edit& e : edits) {
    if (e.position < orig_cursor)
      throw ValidationError("edits overlap or are unsorted at byte " +
                            std::to_string(e.position));
    const size_t copy_len = e.position - orig_cursor;
    if (pert_cursor + copy_len > perturbed.size())
      throw ValidationError("perturbed text shorter than edits imply");
    out.append(perturbed.substr(pert_cursor, copy_len));
    pert_cursor += copy_len;
    if (perturbed.substr(pert_cursor, e.replacement.size()) != e.replacement)
      throw ValidationError("perturbed text does not match edit replacement at byte " +
                            std::to_string(e.position));
    pert_cursor += e.replacement.size();
    out.append(e.original);
    orig_cursor = e.position + e.original.size();
  }
  out.append(perturbed.substr(pert_cursor));
  return out;
}

PerturbedQuestion perturb_punct(const Question& q, double intensity, uint64_t seed) {
  PerturbedQuestion p;
  p.base_id = q.id;
  p.spec = NoiseSpec{NoiseKind::Punct, intensity, seed, 1.0, 0};
  p.edits = plan_punct_insertions(q.text, intensity, seed);
  p.text = apply_edits(q.text, p.edits);
  return p;
}

// --- dictionary typos --------------------------------------------------------

TypoDictionary TypoDictionary::load(const std::string& path) {
  TypoDictionary dict;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    const std::string context = path + ":" + std::to_string(lineno);
    std::string word = require_string(obj, "word", context);
    for (char& c : word) c = ascii_lower(c);
    if (word.empty()) throw ValidationError(context + ": empty word");
    auto it = obj.find("typos");
    if (it == obj.end() || !it->is_array())
      throw ValidationError(context + ": missing \"typos\" array");
    std::vector<std::string>& variants = dict.entries[word];
    for (const json& v : *it) {
      if (!v.is_string()) throw ValidationError(context + ": typo variants must be strings");
      std::string typo = v.get<std::string>();
      if (typo.empty() || typo == word) continue;
      if (std::any_of(typo.begin(), typo.end(), ascii_digit)) continue;
      if (std::find(variants.begin(), variants.end(), typo) == variants.end())
        variants.push_back(std::move(typo));
    }
    if (variants.empty()) dict.entries.erase(word);
  });
  if (dict.entries.empty()) throw ValidationError(path + ": typo dictionary is empty");
  return dict;
}

PerturbedQuestion perturb_wikitypo(const Question& q, const TypoDictionary& dict,
                                   uint64_t seed, double rate) {
  if (!(rate > 0.0) || rate > 1.0)
    throw ValidationError("typo replacement rate must be in (0, 1]");
  if (dict.entries.empty()) throw ValidationError("typo dictionary is empty");

  SplitMix64 rng(seed);
  std::vector<Edit> edits;
  for (const WordSpan& span : split_words(q.text)) {
    std::string token(q.text.substr(span.begin, span.end - span.begin));
    if (std::any_of(token.begin(), token.end(), ascii_digit)) continue;
    std::string folded = token;
    for (char& c : folded) c = ascii_lower(c);
    auto it = dict.entries.find(folded);
    if (it == dict.entries.end()) continue;
    if (!rng.bernoulli(rate)) continue;
    const std::vector<std::string>& variants = it->second;
    const std::string& typo = variants[rng.bounded(variants.size())];
    Edit e;
    e.op = EditOp::ReplaceWord;
    e.position = span.begin;
    e.original = token;
    e.replacement = typo;
    edits.push_back(std::move(e));
  }
  PerturbedQuestion p;
  p.base_id = q.id;
  p.spec = NoiseSpec{NoiseKind::WikiTypo, 0.0, seed, rate, 0};
  p.edits = std::move(edits);
  p.text = apply_edits(q.text, p.edits);
  return p;
}

// --- adversarial typos -------------------------------------------------------

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kSet = {
      "the",   "and",   "are",    "was",     "were",   "been",    "being",  "for",
      "nor",   "but",   "yet",    "both",    "each",   "few",     "many",   "most",
      "other", "some",  "such",   "all",     "any",    "more",    "how",    "what",
      "which", "who",   "whom",   "whose",   "why",    "when",    "where",  "would",
      "could", "should","shall",  "will",    "can",    "may",     "might",  "must",
      "does",  "did",   "doing",  "done",    "has",    "had",     "have",   "having",
      "this",  "that",  "these",  "those",   "there",  "here",    "then",   "than",
      "them",  "they",  "their",  "theirs",  "she",    "her",     "hers",   "him",
      "his",   "its",   "our",    "ours",    "your",   "yours",   "you",    "not",
      "with",  "from",  "into",   "onto",    "over",   "under",   "again",  "about",
      "above", "below", "between","through", "during", "before",  "after",  "while",
      "because","per",  "via",    "upon",    "against","until",   "unless", "since",
      "off",   "out",   "own",    "same",    "too",    "also",    "just",   "now",
      "very",  "only",  "once",   "itself",  "himself","herself", "themselves",
      "ourselves","myself","yourself","further","down", "still",  "ever",   "else",
      "among", "within","without","toward",  "towards","along",   "across", "behind",
      "beyond","either","neither","every",   "another","several", "much",   "many"};
  return kSet;
}

/// Neighboring keys on a US QWERTY layout, used to draw plausible fat-finger
/// substitutions and insertions.
std::string_view qwerty_neighbors(char lower_letter) {
  switch (lower_letter) {
    case 'q': return "wa";
    case 'w': return "qeas";
    case 'e': return "wrsd";
    case 'r': return "etdf";
    case 't': return "ryfg";
    case 'y': return "tugh";
    case 'u': return "yihj";
    case 'i': return "uojk";
    case 'o': return "ipkl";
    case 'p': return "ol";
    case 'a': return "qwsz";
    case 's': return "adwezx";
    case 'd': return "sferxc";
    case 'f': return "dgrtcv";
    case 'g': return "fhtyvb";
    case 'h': return "gjyubn";
    case 'j': return "hkuinm";
    case 'k': return "jliom";
    case 'l': return "kpo";
    case 'z': return "asx";
    case 'x': return "zcsd";
    case 'c': return "xvdf";
    case 'v': return "cbfg";
    case 'b': return "vngh";
    case 'n': return "bmhj";
    case 'm': return "njk";
    default: return "";
  }
}

/// Byte-index positions of ASCII letters inside a token.
std::vector<size_t> letter_positions(std::string_view token) {
  std::vector<size_t> out;
  for (size_t i = 0; i < token.size(); ++i)
    if (ascii_alpha(token[i])) out.push_back(i);
  return out;
}

}  // namespace

std::vector<std::pair<size_t, double>> score_word_importance(std::string_view text) {
  const auto words = split_words(text);
  std::vector<std::pair<size_t, double>> scored;
  scored.reserve(words.size());
  for (size_t w = 0; w < words.size(); ++w) {
    std::string_view token = text.substr(words[w].begin, words[w].end - words[w].begin);
    double score = 0.0;
    if (std::any_of(token.begin(), token.end(), ascii_digit)) {
      // numeric facts must survive, so numbers are never attractive targets
      score = -std::numeric_limits<double>::infinity();
    } else {
      // strip surrounding punctuation; bytes >= 0x80 count as letters
      size_t b = 0, e = token.size();
      auto letterish = [](char c) {
        return ascii_alpha(c) || static_cast<unsigned char>(c) >= 0x80;
      };
      while (b < e && !letterish(token[b]) && !ascii_digit(token[b])) ++b;
      while (e > b && !letterish(token[e - 1]) && !ascii_digit(token[e - 1])) --e;
      std::string_view core = token.substr(b, e - b);
      const bool alphabetic =
          !core.empty() && std::all_of(core.begin(), core.end(), letterish);
      if (alphabetic && core.size() >= 3) {
        std::string folded(core);
        for (char& c : folded) c = ascii_lower(c);
        if (!stopwords().count(folded)) score = 1.0 + static_cast<double>(core.size());
      }
    }
    scored.emplace_back(w, score);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return scored;
}

PerturbedQuestion perturb_ata(const Question& q, int word_budget, uint64_t seed) {
  if (word_budget < 1) throw ValidationError("word budget must be at least 1");
  const auto words = split_words(q.text);
  if (words.empty()) throw ValidationError("cannot perturb text with no words");
  const auto ranked = score_word_importance(q.text);

  SplitMix64 rng(seed);
  std::vector<Edit> edits;
  std::set<size_t> edited;
  std::set<size_t> merged_into;  // words consumed by a space removal

  auto token_at = [&](size_t w) {
    return std::string(q.text.substr(words[w].begin, words[w].end - words[w].begin));
  };

  for (const auto& [w, score] : ranked) {
    if (static_cast<int>(edits.size()) >= word_budget) break;
    if (std::isinf(score)) break;  // numeric words and everything after them
    if (merged_into.count(w)) continue;

    const std::string token = token_at(w);
    const auto letters = letter_positions(token);

    std::vector<EditOp> ops;
    if (!letters.empty()) {
      ops.push_back(EditOp::Duplicate);
      ops.push_back(EditOp::Substitute);
      if (token.size() >= 2) ops.push_back(EditOp::Delete);
      ops.push_back(EditOp::Insert);
    }
    const bool next_mergeable =
        w + 1 < words.size() && !edited.count(w + 1) && !merged_into.count(w + 1) &&
        !std::any_of(q.text.begin() + static_cast<long>(words[w + 1].begin),
                     q.text.begin() + static_cast<long>(words[w + 1].end), ascii_digit);
    if (next_mergeable) ops.push_back(EditOp::RemoveSpace);
    if (ops.empty()) continue;

    const EditOp op = ops[rng.bounded(ops.size())];
    Edit e;
    e.op = op;
    switch (op) {
      case EditOp::Duplicate: {
        const size_t li = letters[rng.bounded(letters.size())];
        e.position = words[w].begin + li + 1;
        e.replacement = std::string(1, token[li]);
        break;
      }
      case EditOp::Substitute: {
        const size_t li = letters[rng.bounded(letters.size())];
        const char c = token[li];
        std::string_view adj = qwerty_neighbors(ascii_lower(c));
        char repl = adj[rng.bounded(adj.size())];
        if (c >= 'A' && c <= 'Z') repl = static_cast<char>(repl - 'a' + 'A');
        e.position = words[w].begin + li;
        e.original = std::string(1, c);
        e.replacement = std::string(1, repl);
        break;
      }
      case EditOp::Delete: {
        const size_t li = letters[rng.bounded(letters.size())];
        e.position = words[w].begin + li;
        e.original = std::string(1, token[li]);
        break;
      }
      case EditOp::Insert: {
        const size_t li = letters[rng.bounded(letters.size())];
        std::string_view adj = qwerty_neighbors(ascii_lower(token[li]));
        e.position = words[w].begin + li + 1;
        e.replacement = std::string(1, adj[rng.bounded(adj.size())]);
        break;
      }
      case EditOp::RemoveSpace: {
        e.position = words[w].end;
        e.original = std::string(1, q.text[words[w].end]);
        merged_into.insert(w + 1);
        break;
      }
      case EditOp::ReplaceWord:
        break;  // not drawn here
    }
    edited.insert(w);
    edits.push_back(std::move(e));
  }

  std::stable_sort(edits.begin(), edits.end(),
                   [](const Edit& a, const Edit& b) { return a.position < b.position; });
  PerturbedQuestion p;
  p.base_id = q.id;
  p.spec = NoiseSpec{NoiseKind::Ata, 0.0, seed, 1.0, word_budget};
  p.edits = std::move(edits);
  p.text = apply_edits(q.text, p.edits);
  return p;
}

std::vector<PerturbedQuestion> load_preperturbed(const std::string& path, const Corpus& base) {
  std::vector<PerturbedQuestion> items;
  std::set<std::string> seen;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    const std::string context = path + ":" + std::to_string(lineno);
    std::string id = obj.contains("base_id") ? require_string(obj, "base_id", context)
                                             : require_string(obj, "id", context);
    if (base.find(id) == nullptr)
      throw ValidationError(context + ": unknown base question id \"" + id + "\"");
    if (!seen.insert(id).second)
      throw ValidationError(context + ": duplicate base question id \"" + id + "\"");
    PerturbedQuestion p;
    p.base_id = std::move(id);
    p.spec = NoiseSpec{NoiseKind::Preloaded, 0.0, 0, 1.0, 0};
    p.text = require_string(obj, "text", context);
    items.push_back(std::move(p));
  });
  if (items.empty()) throw ValidationError(path + ": no perturbed records");
  return items;
}

void write_perturbed(const std::string& path, const std::vector<PerturbedQuestion>& items) {
  std::ostringstream out;
  for (const PerturbedQuestion& p : items) {
    json edits = json::array();
    for (const Edit& e : p.edits)
      edits.push_back({{"op", to_string(e.op)},
                       {"pos", e.position},
                       {"orig", e.original},
                       {"repl", e.replacement}});
    json obj{{"base_id", p.base_id},
             {"kind", to_string(p.spec.kind)},
             {"intensity", p.spec.intensity},
             {"seed", p.spec.seed},
             {"text", p.text},
             {"edits", std::move(edits)}};
    out << obj.dump() << '\n';
  }
  write_file(path, out.str());
}

std::vector<PerturbedQuestion> read_perturbed(const std::string& path) {
  std::vector<PerturbedQuestion> items;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    const std::string context = path + ":" + std::to_string(lineno);
    PerturbedQuestion p;
    p.base_id = require_string(obj, "base_id", context);
    auto kind = parse_noise_kind(require_string(obj, "kind", context));
    if (!kind) throw ValidationError(context + ": unknown noise kind");
    p.spec.kind = *kind;
    p.spec.intensity = obj.value("intensity", 0.0);
    p.spec.seed = obj.value("seed", uint64_t{0});
    p.text = require_string(obj, "text", context);
    if (auto it = obj.find("edits"); it != obj.end() && it->is_array()) {
      for (const json& je : *it) {
        Edit e;
        auto op = parse_edit_op(require_string(je, "op", context));
        if (!op) throw ValidationError(context + ": unknown edit op");
        e.op = *op;
        e.position = je.value("pos", size_t{0});
        e.original = je.value("orig", std::string());
        e.replacement = je.value("repl", std::string());
        p.edits.push_back(std::move(e));
      }
    }
    items.push_back(std::move(p));
  });
  if (items.empty()) throw ValidationError(path + ": no perturbed records");
  return items;
}

}  // namespace pforest
