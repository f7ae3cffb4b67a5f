#include "dupsim/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dupsim/error.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/unicode.hpp"
#include "dupsim/utf8.hpp"
#include "dupsim_augment_tables.hpp"

namespace dupsim::augment {

const char* to_string(Level l) noexcept {
  switch (l) {
    case Level::kParagraph: return "paragraph";
    case Level::kSentence: return "sentence";
    case Level::kWord: return "word";
    case Level::kCharacter: return "character";
  }
  return "?";
}

const char* to_string(Category c) noexcept {
  switch (c) {
    case Category::kInsertion: return "insertion";
    case Category::kDeletion: return "deletion";
    case Category::kSubstitution: return "substitution";
    case Category::kTransposition: return "transposition";
  }
  return "?";
}

const char* to_string(Edit e) noexcept {
  switch (e) {
    case Edit::kRemove: return "remove";
    case Edit::kInsert: return "insert";
    case Edit::kReplace: return "replace";
    case Edit::kSwap: return "swap";
  }
  return "?";
}

Level parse_level(std::string_view s) {
  for (Level l : {Level::kParagraph, Level::kSentence, Level::kWord, Level::kCharacter})
    if (s == to_string(l)) return l;
  fail(ErrorKind::kFormat, "unknown augmentation level: " + std::string(s));
}

Category parse_category(std::string_view s) {
  for (Category c : {Category::kInsertion, Category::kDeletion, Category::kSubstitution, Category::kTransposition})
    if (s == to_string(c)) return c;
  fail(ErrorKind::kFormat, "unknown augmentation category: " + std::string(s));
}

Edit parse_edit(std::string_view s) {
  for (Edit e : {Edit::kRemove, Edit::kInsert, Edit::kReplace, Edit::kSwap})
    if (s == to_string(e)) return e;
  fail(ErrorKind::kFormat, "unknown edit kind: " + std::string(s));
}

const std::vector<OpInfo>& op_catalog() {
  using L = Level;
  using C = Category;
  static const std::vector<OpInfo> catalog = {
      {L::kSentence, C::kDeletion, "random sentence deletion"},
      {L::kSentence, C::kDeletion, "random sentence truncation"},
      {L::kSentence, C::kInsertion, "random prefix sentence"},
      {L::kSentence, C::kInsertion, "random suffix sentence"},
      {L::kSentence, C::kInsertion, "random sentence insertion"},
      {L::kSentence, C::kInsertion, "repeat sentence"},
      {L::kSentence, C::kSubstitution, "lowercase/uppercase sentence"},
      {L::kSentence, C::kSubstitution, "random sentence substitution"},
      {L::kSentence, C::kTransposition, "neighboring swap"},

      {L::kWord, C::kDeletion, "random word deletion"},
      {L::kWord, C::kInsertion, "random word insertion"},
      {L::kWord, C::kInsertion, "random word insertion per language"},
      {L::kWord, C::kSubstitution, "3-gram frequency based word substitution"},
      {L::kWord, C::kSubstitution, "random word substitution"},
      {L::kWord, C::kSubstitution, "random word substitution per language"},
      {L::kWord, C::kSubstitution, "repeat word"},
      {L::kWord, C::kTransposition, "neighboring swap"},

      {L::kCharacter, C::kDeletion, "random character deletion"},
      {L::kCharacter, C::kSubstitution, "case substitution"},
      {L::kCharacter, C::kSubstitution, "n-gram substitution"},
      {L::kCharacter, C::kSubstitution, "qwerty keyboard typo substitution"},
      {L::kCharacter, C::kSubstitution, "homoglyph substitution"},
      {L::kCharacter, C::kSubstitution, "random ascii substitution"},
      {L::kCharacter, C::kSubstitution, "language alphabet substitution"},
      {L::kCharacter, C::kSubstitution, "punctuation substitution"},
      {L::kCharacter, C::kSubstitution, "random unicode substitution"},
      {L::kCharacter, C::kInsertion, "character repetition"},
      {L::kCharacter, C::kInsertion, "n-gram insertion"},
      {L::kCharacter, C::kInsertion, "language alphabet insertion"},
      {L::kCharacter, C::kInsertion, "punctuation insertion"},
      {L::kCharacter, C::kInsertion, "random unicode insertion"},
      {L::kCharacter, C::kTransposition, "neighboring swap"},
  };
  return catalog;
}

namespace {

constexpr std::u32string_view kPunctuation = U".,;:!?'\"-()[]{}/\\@#$%&*";

using unicode::is_space;
using unicode::to_lower;
using unicode::to_upper;

// Scripts written without spaces between words.
bool is_continuous_script(char32_t c) noexcept {
  return (c >= 0x0E00 && c <= 0x0E7F) || (c >= 0x3040 && c <= 0x30FF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0xF900 && c <= 0xFAFF) || (c >= 0xFF00 && c <= 0xFFEF) ||
         (c >= 0x20000 && c <= 0x2FA1F);
}

bool is_terminator(char32_t c) noexcept { return c == U'.' || c == U'!' || c == U'?'; }

std::size_t whitespace_end(std::u32string_view t, std::size_t i) {
  while (i < t.size() && is_space(t[i])) ++i;
  return i;
}

std::u32string default_sep(Level level) {
  switch (level) {
    case Level::kParagraph: return U"\n\n";
    case Level::kSentence:
    case Level::kWord: return U" ";
    case Level::kCharacter: return U"";
  }
  return U"";
}

void segment_words(std::u32string_view t, Segmented& seg) {
  std::size_t i = whitespace_end(t, 0);
  seg.prefix = std::u32string(t.substr(0, i));
  while (i < t.size()) {
    std::size_t j = i;
    while (j < t.size() && !is_space(t[j])) ++j;
    const std::size_t k = whitespace_end(t, j);
    // Split runs of space-free scripts into pieces of at most 4 characters.
    std::size_t start = i;
    while (start < j) {
      std::size_t end = start + 1;
      const bool cont = is_continuous_script(t[start]);
      while (end < j && is_continuous_script(t[end]) == cont && (!cont || end - start < 4)) ++end;
      seg.units.push_back({std::u32string(t.substr(start, end - start)), U""});
      start = end;
    }
    seg.units.back().sep = std::u32string(t.substr(j, k - j));
    i = k;
  }
}

void segment_sentences(std::u32string_view t, Segmented& seg) {
  std::size_t s = whitespace_end(t, 0);
  seg.prefix = std::u32string(t.substr(0, s));
  while (s < t.size()) {
    std::size_t i = s;
    std::size_t body_end = t.size();
    while (i < t.size()) {
      if (t[i] == U'\n') {
        body_end = i;
        break;
      }
      if (is_terminator(t[i])) {
        std::size_t j = i + 1;
        while (j < t.size() && is_terminator(t[j])) ++j;
        if (j == t.size() || is_space(t[j])) {
          body_end = j;
          break;
        }
        i = j;
        continue;
      }
      ++i;
    }
    if (body_end == t.size()) {
      // Trailing whitespace of an unterminated final sentence becomes its separator.
      while (body_end > s && is_space(t[body_end - 1])) --body_end;
    }
    const std::size_t next = whitespace_end(t, body_end);
    seg.units.push_back({std::u32string(t.substr(s, body_end - s)), std::u32string(t.substr(body_end, next - body_end))});
    s = next;
  }
}

void segment_paragraphs(std::u32string_view t, Segmented& seg) {
  std::size_t s = whitespace_end(t, 0);
  seg.prefix = std::u32string(t.substr(0, s));
  while (s < t.size()) {
    std::size_t i = s;
    std::size_t body_end = t.size(), next = t.size();
    while (i < t.size()) {
      if (!is_space(t[i])) {
        ++i;
        continue;
      }
      const std::size_t j = whitespace_end(t, i);
      const auto newlines = std::count(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(j), U'\n');
      if (newlines >= 2 || j == t.size()) {
        body_end = i;
        next = j;
        break;
      }
      i = j;
    }
    seg.units.push_back({std::u32string(t.substr(s, body_end - s)), std::u32string(t.substr(body_end, next - body_end))});
    s = next;
  }
}

std::vector<Unit> make_units(const std::u32string& payload, Level level) {
  std::vector<Unit> out;
  if (level == Level::kCharacter) {
    for (char32_t c : payload) out.push_back({std::u32string(1, c), U""});
  } else {
    out.push_back({payload, default_sep(level)});
  }
  return out;
}

void apply_edit(Segmented& seg, const AppliedOp& op) {
  auto& u = seg.units;
  const auto pos = static_cast<std::ptrdiff_t>(op.position);
  switch (op.edit) {
    case Edit::kRemove:
      require(op.span >= 1 && op.position + op.span <= u.size() && op.span < u.size(), ErrorKind::kInvalidArgument,
              "remove edit out of range");
      u.erase(u.begin() + pos, u.begin() + pos + static_cast<std::ptrdiff_t>(op.span));
      break;
    case Edit::kInsert: {
      require(op.position <= u.size() && !op.payload.empty(), ErrorKind::kInvalidArgument, "insert edit out of range");
      auto fresh = make_units(op.payload, op.level);
      if (op.position == u.size() && !u.empty()) {
        std::u32string tail = u.back().sep;
        if (tail.empty()) u.back().sep = default_sep(op.level);
        fresh.back().sep = tail;
      }
      u.insert(u.begin() + pos, fresh.begin(), fresh.end());
      break;
    }
    case Edit::kReplace: {
      require(op.span >= 1 && op.position + op.span <= u.size() && !op.payload.empty(), ErrorKind::kInvalidArgument,
              "replace edit out of range");
      const std::u32string tail = u[op.position + op.span - 1].sep;
      auto fresh = make_units(op.payload, op.level);
      fresh.back().sep = tail;
      u.erase(u.begin() + pos, u.begin() + pos + static_cast<std::ptrdiff_t>(op.span));
      u.insert(u.begin() + pos, fresh.begin(), fresh.end());
      break;
    }
    case Edit::kSwap:
      require(op.position + 1 < u.size(), ErrorKind::kInvalidArgument, "swap edit out of range");
      std::swap(u[op.position].body, u[op.position + 1].body);
      break;
  }
}

std::size_t round_half_up(double x) { return x <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(x + 0.5)); }

std::u32string text_alphabet(std::u32string_view text) {
  std::set<char32_t> chars;
  for (char32_t c : text)
    if (!is_space(c)) chars.insert(c);
  return std::u32string(chars.begin(), chars.end());
}

// Per-call state for proposing concrete ops.
struct Context {
  const Resources& res;
  Rng& rng;
  std::optional<std::string> lang;
  std::u32string alphabet;             // of the original text
  std::vector<std::u32string> words;   // of the original text
  std::u32string original;

  std::u32string random_ascii_word() {
    std::u32string w;
    const auto len = rng.between(2, 8);
    for (std::int64_t i = 0; i < len; ++i) w.push_back(static_cast<char32_t>(U'a' + rng.below(26)));
    return w;
  }

  std::u32string global_word() {
    if (!res.words.empty()) return rng.pick(res.words);
    return random_ascii_word();
  }

  std::u32string language_word() {
    if (lang) {
      auto it = res.words_by_lang.find(*lang);
      if (it != res.words_by_lang.end() && !it->second.empty()) return rng.pick(it->second);
    }
    if (!words.empty()) return rng.pick(words);
    return global_word();
  }

  std::u32string random_sentence() {
    if (lang) {
      auto it = res.sentences_by_lang.find(*lang);
      if (it != res.sentences_by_lang.end() && !it->second.empty()) return rng.pick(it->second);
    }
    if (!res.sentences.empty()) return rng.pick(res.sentences);
    std::u32string s;
    const auto n = rng.between(3, 9);
    for (std::int64_t i = 0; i < n; ++i) {
      if (i) s.push_back(U' ');
      s += language_word();
    }
    s[0] = to_upper(s[0]);
    s.push_back(U'.');
    return s;
  }

  char32_t alphabet_char() {
    if (lang) {
      auto it = res.alphabet_by_lang.find(*lang);
      if (it != res.alphabet_by_lang.end() && !it->second.empty()) return rng.pick(it->second);
    }
    if (!alphabet.empty()) return rng.pick(alphabet);
    return static_cast<char32_t>(U'a' + rng.below(26));
  }

  char32_t unicode_char() {
    for (;;) {
      const auto c = static_cast<char32_t>(rng.between(0x21, 0x2FFFF));
      if ((c >= 0x7F && c <= 0x9F) || (c >= 0xD800 && c <= 0xDFFF) || is_space(c)) continue;
      return c;
    }
  }

  std::u32string ngram(std::size_t n) {
    const auto& pool = res.char_ngrams[n - 3];
    if (!pool.empty()) return rng.pick(pool);
    if (original.size() >= n) return original.substr(rng.below(original.size() - n + 1), n);
    std::u32string g;
    for (std::size_t i = 0; i < n; ++i) g.push_back(alphabet_char());
    return g;
  }
};

template <class Pred>
std::optional<std::size_t> pick_position(const Segmented& seg, std::size_t limit, Rng& rng, Pred pred) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < limit && i < seg.units.size(); ++i)
    if (pred(i)) candidates.push_back(i);
  if (candidates.empty()) return std::nullopt;
  return rng.pick(candidates);
}

std::u32string case_mapped(const std::u32string& s, bool upper) {
  std::u32string out = s;
  for (auto& c : out) c = upper ? to_upper(c) : to_lower(c);
  return out;
}

std::u32string context_key(const std::u32string& a, const std::u32string& b) {
  std::u32string k = a;
  k.push_back(U'\x1f');
  k += b;
  return k;
}

const std::vector<std::pair<std::u32string, std::uint32_t>>* continuations(const Resources& res, const Segmented& seg,
                                                                            std::size_t pos) {
  if (pos >= 2) {
    auto it = res.trigrams.find(context_key(seg.units[pos - 2].body, seg.units[pos - 1].body));
    if (it != res.trigrams.end()) return &it->second;
  }
  if (pos >= 1) {
    auto it = res.bigrams.find(seg.units[pos - 1].body);
    if (it != res.bigrams.end()) return &it->second;
  }
  return nullptr;
}

bool has_other(const std::vector<std::pair<std::u32string, std::uint32_t>>& c, const std::u32string& current) {
  return std::any_of(c.begin(), c.end(), [&](const auto& p) { return p.first != current; });
}

std::optional<AppliedOp> propose(const OpInfo& info, Level level, const Segmented& seg, Context& ctx) {
  Rng& rng = ctx.rng;
  const std::size_t n = seg.units.size();
  AppliedOp op{level, info.category, info.name, 0, Edit::kReplace, 1, U""};
  const std::string& name = info.name;
  auto any = [](std::size_t) { return true; };
  auto at = [&](std::size_t i) -> const std::u32string& { return seg.units[i].body; };

  if (name == "neighboring swap") {
    auto p = pick_position(seg, n ? n - 1 : 0, rng, [&](std::size_t i) { return at(i) != at(i + 1); });
    if (!p) return std::nullopt;
    op.position = *p;
    op.edit = Edit::kSwap;
    op.span = 2;
    return op;
  }
  if (name == "random sentence deletion" || name == "random word deletion" || name == "random character deletion") {
    if (n < 2) return std::nullopt;
    op.position = rng.below(n);
    op.edit = Edit::kRemove;
    return op;
  }
  if (name == "random sentence truncation") {
    auto p = pick_position(seg, n, rng, [&](std::size_t i) { return at(i).size() >= 2; });
    if (!p) return std::nullopt;
    op.position = *p;
    op.payload = at(*p).substr(0, rng.between(1, static_cast<std::int64_t>(at(*p).size()) - 1));
    return op;
  }
  if (name == "random prefix sentence" || name == "random suffix sentence" || name == "random sentence insertion") {
    op.edit = Edit::kInsert;
    op.position = name == "random prefix sentence" ? 0 : name == "random suffix sentence" ? n : rng.below(n + 1);
    op.payload = ctx.random_sentence();
    return op;
  }
  if (name == "repeat sentence") {
    if (n == 0) return std::nullopt;
    const std::size_t p = rng.below(n);
    op.edit = Edit::kInsert;
    op.position = p + 1;
    op.payload = at(p);
    return op;
  }
  if (name == "lowercase/uppercase sentence") {
    const bool upper = rng.bernoulli(0.5);
    auto p = pick_position(seg, n, rng, [&](std::size_t i) {
      return case_mapped(at(i), true) != at(i) || case_mapped(at(i), false) != at(i);
    });
    if (!p) return std::nullopt;
    op.position = *p;
    op.payload = case_mapped(at(*p), upper);
    if (op.payload == at(*p)) op.payload = case_mapped(at(*p), !upper);
    return op;
  }
  if (name == "random sentence substitution") {
    if (n == 0) return std::nullopt;
    op.position = rng.below(n);
    op.payload = ctx.random_sentence();
    return op.payload == at(op.position) ? std::nullopt : std::optional(op);
  }
  if (name == "random word insertion" || name == "random word insertion per language") {
    op.edit = Edit::kInsert;
    op.position = rng.below(n + 1);
    op.payload = name == "random word insertion" ? ctx.global_word() : ctx.language_word();
    return op;
  }
  if (name == "random word substitution" || name == "random word substitution per language") {
    if (n == 0) return std::nullopt;
    op.position = rng.below(n);
    op.payload = name == "random word substitution" ? ctx.global_word() : ctx.language_word();
    return op.payload == at(op.position) ? std::nullopt : std::optional(op);
  }
  if (name == "3-gram frequency based word substitution") {
    auto p = pick_position(seg, n, rng, [&](std::size_t i) {
      const auto* c = continuations(ctx.res, seg, i);
      return c && has_other(*c, at(i));
    });
    if (!p) return std::nullopt;
    const auto& cands = *continuations(ctx.res, seg, *p);
    std::uint64_t total = 0;
    for (const auto& [w, count] : cands)
      if (w != at(*p)) total += count;
    std::uint64_t r = rng.below(total);
    for (const auto& [w, count] : cands) {
      if (w == at(*p)) continue;
      if (r < count) {
        op.payload = w;
        break;
      }
      r -= count;
    }
    op.position = *p;
    return op;
  }
  if (name == "repeat word") {
    auto p = pick_position(seg, n, rng, [&](std::size_t i) { return i >= 1 && at(i) != at(i - 1); });
    if (!p) return std::nullopt;
    op.position = *p;
    op.payload = at(*p - 1);
    return op;
  }
  if (name == "case substitution") {
    auto p = pick_position(seg, n, rng, [&](std::size_t i) {
      const char32_t c = at(i)[0];
      return to_upper(c) != c || to_lower(c) != c;
    });
    if (!p) return std::nullopt;
    const char32_t c = at(*p)[0];
    op.position = *p;
    op.payload = std::u32string(1, to_upper(c) != c ? to_upper(c) : to_lower(c));
    return op;
  }
  if (name == "n-gram substitution") {
    const std::size_t g = 3 + rng.below(3);
    if (n < g + 1) return std::nullopt;
    op.position = rng.below(n - g + 1);
    op.span = g;
    op.payload = ctx.ngram(g);
    return op;
  }
  if (name == "qwerty keyboard typo substitution" || name == "homoglyph substitution") {
    const bool qwerty = name[0] == 'q';
    const auto& table = qwerty ? ctx.res.qwerty : ctx.res.homoglyphs;
    auto lookup = [&](char32_t c) -> const std::u32string* {
      auto it = table.find(qwerty ? to_lower(c) : c);
      return it == table.end() || it->second.empty() ? nullptr : &it->second;
    };
    auto p = pick_position(seg, n, rng, [&](std::size_t i) { return lookup(at(i)[0]) != nullptr; });
    if (!p) return std::nullopt;
    const char32_t c = at(*p)[0];
    char32_t r = rng.pick(*lookup(c));
    if (qwerty && to_lower(c) != c) r = to_upper(r);
    op.position = *p;
    op.payload = std::u32string(1, r);
    return op;
  }
  if (name == "random ascii substitution" || name == "language alphabet substitution" ||
      name == "punctuation substitution" || name == "random unicode substitution") {
    if (n == 0) return std::nullopt;
    op.position = rng.below(n);
    char32_t r;
    if (name == "random ascii substitution") r = static_cast<char32_t>(rng.between(0x21, 0x7E));
    else if (name == "language alphabet substitution") r = ctx.alphabet_char();
    else if (name == "punctuation substitution") r = rng.pick(kPunctuation);
    else r = ctx.unicode_char();
    if (r == at(op.position)[0]) return std::nullopt;
    op.payload = std::u32string(1, r);
    return op;
  }
  if (name == "character repetition") {
    if (n == 0) return std::nullopt;
    const std::size_t p = rng.below(n);
    op.edit = Edit::kInsert;
    op.position = p + 1;
    op.payload = at(p);
    return op;
  }
  if (name == "n-gram insertion" || name == "language alphabet insertion" || name == "punctuation insertion" ||
      name == "random unicode insertion") {
    op.edit = Edit::kInsert;
    op.position = rng.below(n + 1);
    if (name == "n-gram insertion") op.payload = ctx.ngram(3 + rng.below(3));
    else if (name == "language alphabet insertion") op.payload = std::u32string(1, ctx.alphabet_char());
    else if (name == "punctuation insertion") op.payload = std::u32string(1, rng.pick(kPunctuation));
    else op.payload = std::u32string(1, ctx.unicode_char());
    return op;
  }
  (void)any;
  fail(ErrorKind::kInvalidArgument, "unhandled augmentation op: " + name);
}

Level catalog_level(Level level) { return level == Level::kParagraph ? Level::kSentence : level; }

}  // namespace

std::u32string Segmented::join() const {
  std::u32string out = prefix;
  for (const auto& u : units) {
    out += u.body;
    out += u.sep;
  }
  return out;
}

Segmented segment(std::u32string_view text, Level level) {
  Segmented seg;
  switch (level) {
    case Level::kCharacter:
      seg.units.reserve(text.size());
      for (char32_t c : text) seg.units.push_back({std::u32string(1, c), U""});
      break;
    case Level::kWord: segment_words(text, seg); break;
    case Level::kSentence: segment_sentences(text, seg); break;
    case Level::kParagraph: segment_paragraphs(text, seg); break;
  }
  return seg;
}

void AugmentationPlan::validate() const {
  for (double r : {paragraph_rate, sentence_rate, word_char_rate, word_share})
    require(r >= 0.0 && r <= 1.0 && std::isfinite(r), ErrorKind::kInvalidArgument,
            "augmentation rates and word_share must be in [0, 1]");
  require(!op_set.empty(), ErrorKind::kInvalidArgument, "augmentation op_set must not be empty");
  for (const auto& name : op_filter) {
    const auto& cat = op_catalog();
    require(std::any_of(cat.begin(), cat.end(), [&](const OpInfo& o) { return o.name == name; }),
            ErrorKind::kInvalidArgument, "unknown augmentation op: " + name);
  }
}

AugmentationPlan AugmentationPlan::sampled(std::uint64_t seed, double max_sentence, double max_word_char) {
  Rng rng(derive_seed(seed, 0x706c616eull));
  AugmentationPlan p;
  p.sentence_rate = rng.uniform(0.0, max_sentence);
  p.word_char_rate = rng.uniform(0.0, max_word_char);
  p.word_share = rng.uniform();
  p.seed = seed;
  return p;
}

std::unordered_map<char32_t, std::u32string> parse_char_table(std::string_view tsv) {
  std::unordered_map<char32_t, std::u32string> table;
  const std::u32string text = utf8::decode(tsv);
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(U'\n', start);
    if (end == std::u32string::npos) end = text.size();
    std::u32string_view line(text.data() + start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == U'\r') line.remove_suffix(1);
    if (line.empty() || line[0] == U'#') continue;
    const auto tab = line.find(U'\t');
    require(tab == 1, ErrorKind::kFormat, "character table lines must be '<char>\\t<candidates>'");
    table[line[0]] = std::u32string(line.substr(2));
  }
  return table;
}

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open table: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

Resources::Resources()
    : homoglyphs(parse_char_table(tables::kHomoglyphsTsv)), qwerty(parse_char_table(tables::kQwertyTsv)) {}

void Resources::load_homoglyphs(const std::string& path) { homoglyphs = parse_char_table(slurp(path)); }
void Resources::load_qwerty(const std::string& path) { qwerty = parse_char_table(slurp(path)); }

Resources Resources::from_corpus(const std::vector<CorpusDoc>& docs) {
  constexpr std::size_t kSentenceCap = 50000;
  constexpr std::size_t kWordCap = 200000;
  constexpr std::size_t kNgramCap = 50000;
  Resources r;
  std::map<std::u32string, std::map<std::u32string, std::uint32_t>> tri, bi;
  std::map<std::string, std::set<char32_t>> alphabets;
  for (const auto& doc : docs) {
    const std::u32string text = utf8::decode(doc.text);
    const std::string lang = doc.lang.empty() ? "und" : doc.lang;
    for (auto& s : segment(text, Level::kSentence).units) {
      if (r.sentences.size() < kSentenceCap) r.sentences.push_back(s.body);
      auto& per = r.sentences_by_lang[lang];
      if (per.size() < kSentenceCap) per.push_back(std::move(s.body));
    }
    const auto words = segment(text, Level::kWord).units;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto& w = words[i].body;
      if (r.words.size() < kWordCap) r.words.push_back(w);
      auto& per = r.words_by_lang[lang];
      if (per.size() < kWordCap) per.push_back(w);
      if (i >= 1) ++bi[words[i - 1].body][w];
      if (i >= 2) ++tri[context_key(words[i - 2].body, words[i - 1].body)][w];
    }
    for (char32_t c : text)
      if (!is_space(c)) alphabets[lang].insert(c);
    for (std::size_t g = 3; g <= 5; ++g) {
      auto& pool = r.char_ngrams[g - 3];
      for (std::size_t i = 0; i + g <= text.size() && pool.size() < kNgramCap; i += g) pool.push_back(text.substr(i, g));
    }
  }
  for (auto& [k, m] : tri) r.trigrams[k].assign(m.begin(), m.end());
  for (auto& [k, m] : bi) r.bigrams[k].assign(m.begin(), m.end());
  for (auto& [lang, set] : alphabets) r.alphabet_by_lang[lang] = std::u32string(set.begin(), set.end());
  return r;
}

AugmentationRecord augment(std::u32string_view text, const AugmentationPlan& plan, const Resources& res) {
  plan.validate();
  require(!text.empty(), ErrorKind::kEmptyInput, "cannot augment empty text");
  AugmentationRecord rec;
  rec.original = std::u32string(text);
  rec.paragraph_rate = plan.paragraph_rate;
  rec.sentence_rate = plan.sentence_rate;
  rec.word_rate = plan.word_rate();
  rec.char_rate = plan.char_rate();

  Rng rng(derive_seed(plan.seed, 0x61756721ull));
  Context ctx{res, rng, plan.language_hint, text_alphabet(text), {}, rec.original};
  for (auto& u : segment(text, Level::kWord).units) ctx.words.push_back(std::move(u.body));

  std::u32string current = rec.original;
  const std::pair<Level, double> levels[] = {{Level::kParagraph, rec.paragraph_rate},
                                             {Level::kSentence, rec.sentence_rate},
                                             {Level::kWord, rec.word_rate},
                                             {Level::kCharacter, rec.char_rate}};
  for (const auto& [level, rate] : levels) {
    Segmented seg = segment(current, level);
    const std::size_t count = round_half_up(rate * static_cast<double>(seg.units.size()));
    if (count == 0) continue;

    std::map<Category, std::vector<const OpInfo*>> eligible;
    for (const auto& info : op_catalog()) {
      if (info.level != catalog_level(level)) continue;
      if (std::find(plan.op_set.begin(), plan.op_set.end(), info.category) == plan.op_set.end()) continue;
      if (!plan.op_filter.empty() &&
          std::find(plan.op_filter.begin(), plan.op_filter.end(), info.name) == plan.op_filter.end())
        continue;
      eligible[info.category].push_back(&info);
    }
    if (eligible.empty()) continue;
    std::vector<Category> categories;
    for (const auto& [c, ops] : eligible) categories.push_back(c);

    for (std::size_t a = 0; a < count; ++a) {
      for (int attempt = 0; attempt < 8; ++attempt) {
        const Category cat = rng.pick(categories);
        const OpInfo* info = rng.pick(eligible[cat]);
        if (auto op = propose(*info, level, seg, ctx)) {
          apply_edit(seg, *op);
          rec.applied_ops.push_back(std::move(*op));
          break;
        }
      }
    }
    current = seg.join();
  }
  rec.augmented = std::move(current);
  return rec;
}

std::u32string replay(std::u32string_view original, const std::vector<AppliedOp>& ops) {
  std::u32string current(original);
  std::size_t i = 0;
  while (i < ops.size()) {
    const Level level = ops[i].level;
    Segmented seg = segment(current, level);
    for (; i < ops.size() && ops[i].level == level; ++i) apply_edit(seg, ops[i]);
    current = seg.join();
  }
  return current;
}

std::u32string select_chunk(std::u32string_view text, std::size_t chunk_len, std::uint64_t seed) {
  Rng rng(seed);
  const Segmented seg = segment(text, Level::kSentence);
  if (seg.units.empty()) return std::u32string(text.substr(0, chunk_len));
  const std::size_t n = seg.units.size();
  const std::size_t k = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(std::min<std::size_t>(8, n))));
  const std::size_t start = rng.below(n - k + 1);
  std::u32string out;
  for (std::size_t i = start; i < start + k; ++i) {
    out += seg.units[i].body;
    if (i + 1 < start + k) out += seg.units[i].sep;
    if (out.size() >= chunk_len) break;
  }
  if (out.size() > chunk_len) out.resize(chunk_len);
  return out;
}

TrainingPair make_training_pair(std::u32string_view text, std::uint64_t class_id, const PairConfig& cfg,
                                std::uint64_t seed, const Resources& res, const std::optional<std::string>& lang) {
  const std::u32string chunk = select_chunk(text, cfg.chunk_len, derive_seed(seed, 0));
  auto plan_a = AugmentationPlan::sampled(derive_seed(seed, 1), cfg.max_sentence_rate, cfg.max_word_char_rate);
  auto plan_b = AugmentationPlan::sampled(derive_seed(seed, 2), cfg.max_sentence_rate, cfg.max_word_char_rate);
  plan_a.language_hint = lang;
  plan_b.language_hint = lang;
  TrainingPair pair;
  pair.class_id = class_id;
  pair.anchor = augment(chunk, plan_a, res).augmented;
  pair.positive = augment(chunk, plan_b, res).augmented;
  if (pair.anchor.size() > cfg.chunk_len) pair.anchor.resize(cfg.chunk_len);
  if (pair.positive.size() > cfg.chunk_len) pair.positive.resize(cfg.chunk_len);
  return pair;
}

std::vector<TrainingPair> generate_training_pairs(const std::vector<std::u32string>& corpus, const PairConfig& cfg,
                                                  std::uint64_t seed, const Resources& res) {
  require(!corpus.empty(), ErrorKind::kEmptyInput, "training corpus is empty");
  std::vector<TrainingPair> pairs;
  std::uint64_t class_id = 0;
  for (const auto& text : corpus) {
    if (text.size() < cfg.min_chars) continue;
    for (std::size_t p = 0; p < cfg.pairs_per_example; ++p)
      pairs.push_back(make_training_pair(text, class_id, cfg, derive_seed(seed, class_id, p), res));
    ++class_id;
  }
  return pairs;
}

}  // namespace dupsim::augment
