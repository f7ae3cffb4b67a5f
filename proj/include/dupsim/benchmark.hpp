#pragma once

// Adversarial retrieval benchmark: per language, targets are random-length
// prefixes of corpus texts and queries are augmented copies of the targets.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dupsim/augment.hpp"
#include "dupsim/corpus.hpp"

namespace dupsim {

struct BenchmarkRecord {
  std::string pair_id;
  std::string lang;
  std::u32string target_text;
  std::u32string query_text;
  // Rates and ops; original/augmented mirror target/query.
  augment::AugmentationRecord augmentation;
  std::size_t target_len = 0;
};

struct BenchmarkConfig {
  std::size_t per_lang = 10000;
  std::uint64_t seed = 0;
  std::size_t min_len = 16;
  std::size_t max_len = 8192;
  // Paragraph+sentence rate ~ U[0, max_sentence_rate] split by a uniform
  // share; word+char rate ~ U[0, max_word_char_rate] split likewise.
  double max_sentence_rate = 0.25;
  double max_word_char_rate = 0.25;
  // Fixed values replace the sampled ones when set.
  std::optional<double> sentence_rate;
  std::optional<double> paragraph_share;
  std::optional<double> word_char_rate;
  std::optional<double> word_share;
  std::vector<augment::Category> op_set{augment::Category::kInsertion, augment::Category::kDeletion,
                                        augment::Category::kSubstitution, augment::Category::kTransposition};

  void validate() const;
};

// Languages in sorted order; empty tags count as "und". Languages with fewer
// eligible texts than per_lang contribute all of them and add a warning.
std::vector<BenchmarkRecord> generate_benchmark(const std::vector<CorpusDoc>& corpus, const BenchmarkConfig& cfg,
                                                const augment::Resources& res,
                                                std::vector<std::string>* warnings = nullptr);

std::string benchmark_record_json(const BenchmarkRecord& r);
void write_benchmark_jsonl(const std::string& path, const std::vector<BenchmarkRecord>& records);
std::vector<BenchmarkRecord> read_benchmark_jsonl(const std::string& path);

}  // namespace dupsim
