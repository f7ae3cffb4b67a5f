#pragma once

// Synthetic corpora for tests: Zipf-distributed words over an invented
// vocabulary, grouped into sentences and paragraphs.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dupsim/corpus.hpp"

namespace dupsim::testkit {

struct SynthConfig {
  std::size_t vocab = 2000;
  double zipf_s = 1.1;
  std::size_t min_chars = 200;
  std::size_t max_chars = 400;
  std::string lang = "en";
  std::string id_prefix = "doc";
};

std::vector<std::string> synth_vocabulary(std::size_t n, std::uint64_t seed);
std::vector<CorpusDoc> synth_corpus(std::size_t n, std::uint64_t seed, const SynthConfig& cfg = {});

// Random ASCII word text of exactly `words` words.
std::string random_words(std::size_t words, std::uint64_t seed);

std::string file_bytes(const std::string& path);
std::uint64_t file_checksum(const std::string& path);

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const noexcept { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

}  // namespace dupsim::testkit
