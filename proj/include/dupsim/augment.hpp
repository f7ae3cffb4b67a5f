#pragma once

// Multi-level text augmentation (paragraph, sentence, word, character). Every
// applied edit is logged with its payload so the log alone reproduces the
// augmented text from the original.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dupsim/corpus.hpp"

namespace dupsim::augment {

enum class Level { kParagraph, kSentence, kWord, kCharacter };
enum class Category { kInsertion, kDeletion, kSubstitution, kTransposition };
enum class Edit { kRemove, kInsert, kReplace, kSwap };

const char* to_string(Level l) noexcept;
const char* to_string(Category c) noexcept;
const char* to_string(Edit e) noexcept;
Level parse_level(std::string_view s);
Category parse_category(std::string_view s);
Edit parse_edit(std::string_view s);

struct OpInfo {
  Level level;
  Category category;
  std::string name;
};

// Every op, grouped by (level, category). Paragraph-level augmentation reuses
// the sentence ops on blank-line separated units, so it has no own entries.
const std::vector<OpInfo>& op_catalog();

struct AppliedOp {
  Level level;
  Category category;
  std::string name;
  std::size_t position = 0;
  Edit edit = Edit::kReplace;
  std::size_t span = 1;    // units removed or replaced
  std::u32string payload;  // inserted or replacing content

  bool operator==(const AppliedOp&) const = default;
};

struct AugmentationRecord {
  std::u32string original;
  std::u32string augmented;
  std::vector<AppliedOp> applied_ops;
  double paragraph_rate = 0, sentence_rate = 0, word_rate = 0, char_rate = 0;

  bool operator==(const AugmentationRecord&) const = default;
};

struct AugmentationPlan {
  double paragraph_rate = 0.0;
  double sentence_rate = 0.0;
  // Combined word + character rate; word_share of it goes to the word level.
  double word_char_rate = 0.0;
  double word_share = 0.5;
  std::vector<Category> op_set{Category::kInsertion, Category::kDeletion, Category::kSubstitution,
                               Category::kTransposition};
  // When non-empty, only ops with these catalog names are eligible.
  std::vector<std::string> op_filter;
  std::optional<std::string> language_hint;
  std::uint64_t seed = 0;

  double word_rate() const noexcept { return word_char_rate * word_share; }
  double char_rate() const noexcept { return word_char_rate * (1.0 - word_share); }
  void validate() const;

  // Training regime: sentence rate ~ U[0, max_sentence], combined word+char
  // rate ~ U[0, max_word_char], split by a share ~ U[0, 1].
  static AugmentationPlan sampled(std::uint64_t seed, double max_sentence = 0.25, double max_word_char = 0.30);
};

// Word/sentence pools, n-gram statistics and confusable tables the ops draw
// from. Pools are built from a corpus; the confusable tables default to the
// compiled-in copies of data/homoglyphs.tsv and data/qwerty.tsv.
class Resources {
 public:
  Resources();
  static Resources from_corpus(const std::vector<CorpusDoc>& docs);

  void load_homoglyphs(const std::string& path);
  void load_qwerty(const std::string& path);

  std::unordered_map<char32_t, std::u32string> homoglyphs;
  std::unordered_map<char32_t, std::u32string> qwerty;
  std::vector<std::u32string> sentences;
  std::vector<std::u32string> words;
  std::map<std::string, std::vector<std::u32string>> sentences_by_lang;
  std::map<std::string, std::vector<std::u32string>> words_by_lang;
  std::map<std::string, std::u32string> alphabet_by_lang;
  // (w1 \x1f w2) -> continuations with counts, sorted by word for determinism.
  std::map<std::u32string, std::vector<std::pair<std::u32string, std::uint32_t>>> trigrams;
  std::map<std::u32string, std::vector<std::pair<std::u32string, std::uint32_t>>> bigrams;
  std::vector<std::u32string> char_ngrams[3];  // n = 3, 4, 5
};

// Parses "key<TAB>candidates" lines; '#' lines are comments.
std::unordered_map<char32_t, std::u32string> parse_char_table(std::string_view tsv);

AugmentationRecord augment(std::u32string_view text, const AugmentationPlan& plan, const Resources& res);

// Applies a logged op sequence to the original text.
std::u32string replay(std::u32string_view original, const std::vector<AppliedOp>& ops);

// Unit segmentation shared by augment and replay. join() of a segmentation
// returns the input exactly.
struct Unit {
  std::u32string body;
  std::u32string sep;
};
struct Segmented {
  std::u32string prefix;
  std::vector<Unit> units;
  std::u32string join() const;
};
Segmented segment(std::u32string_view text, Level level);

// Training pairs: contiguous runs of 1-8 sentences truncated to chunk_len,
// each augmented twice with independently sampled plans.
struct PairConfig {
  std::size_t pairs_per_example = 5;
  std::size_t chunk_len = 512;
  std::size_t min_chars = 16;
  double max_sentence_rate = 0.25;
  double max_word_char_rate = 0.30;
};

struct TrainingPair {
  std::u32string anchor;
  std::u32string positive;
  std::uint64_t class_id = 0;
};

std::u32string select_chunk(std::u32string_view text, std::size_t chunk_len, std::uint64_t seed);
TrainingPair make_training_pair(std::u32string_view text, std::uint64_t class_id, const PairConfig& cfg,
                                std::uint64_t seed, const Resources& res,
                                const std::optional<std::string>& lang = std::nullopt);
// Texts shorter than cfg.min_chars are skipped; class ids number the kept
// texts in input order.
std::vector<TrainingPair> generate_training_pairs(const std::vector<std::u32string>& corpus, const PairConfig& cfg,
                                                  std::uint64_t seed, const Resources& res);

}  // namespace dupsim::augment
