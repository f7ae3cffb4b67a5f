#include "dupsim/corpus.hpp"

#include <fstream>

#include <json.hpp>

#include "dupsim/error.hpp"
#include "dupsim/utf8.hpp"

namespace dupsim {

std::vector<CorpusDoc> read_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open corpus: " + path);
  std::vector<CorpusDoc> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CorpusDoc d;
      d.text = j.at("text").get<std::string>();
      d.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                              : std::to_string(docs.size());
      if (j.contains("lang") && j["lang"].is_string()) d.lang = j["lang"].get<std::string>();
      if (j.contains("cluster"))
        d.cluster = j["cluster"].is_string() ? j["cluster"].get<std::string>() : j["cluster"].dump();
      (void)utf8::decode(d.text);
      docs.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kFormat, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

void write_corpus_jsonl(const std::string& path, const std::vector<CorpusDoc>& docs) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write corpus: " + path);
  for (const auto& d : docs) {
    nlohmann::json j = {{"id", d.id}, {"text", d.text}};
    if (!d.lang.empty()) j["lang"] = d.lang;
    if (!d.cluster.empty()) j["cluster"] = d.cluster;
    out << j.dump() << '\n';
  }
}

}  // namespace dupsim
