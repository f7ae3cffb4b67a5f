#pragma once

#include <string>
#include <vector>

namespace dupsim {

// One line of a JSONL corpus: {"id", "text", optional "lang", optional "cluster"}.
struct CorpusDoc {
  std::string id;
  std::string text;  // UTF-8
  std::string lang;
  std::string cluster;  // gold cluster label, evaluation corpora only
};

std::vector<CorpusDoc> read_corpus_jsonl(const std::string& path);
void write_corpus_jsonl(const std::string& path, const std::vector<CorpusDoc>& docs);

}  // namespace dupsim
