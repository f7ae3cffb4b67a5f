#include "dupsim/benchmark.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "dupsim/error.hpp"
#include "dupsim/params.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/utf8.hpp"

namespace dupsim {

using nlohmann::json;

void BenchmarkConfig::validate() const {
  require(per_lang >= 1, ErrorKind::kInvalidArgument, "per_lang must be >= 1");
  require(min_len >= 1 && min_len <= max_len, ErrorKind::kInvalidArgument, "target length range is empty");
  auto unit = [](double v) { return v >= 0 && v <= 1; };
  require(unit(max_sentence_rate) && unit(max_word_char_rate), ErrorKind::kInvalidArgument,
          "maximum augmentation rates must be in [0, 1]");
  for (const auto& v : {sentence_rate, paragraph_share, word_char_rate, word_share})
    require(!v || unit(*v), ErrorKind::kInvalidArgument, "fixed augmentation rates must be in [0, 1]");
  require(!op_set.empty(), ErrorKind::kInvalidArgument, "op_set must not be empty");
}

std::vector<BenchmarkRecord> generate_benchmark(const std::vector<CorpusDoc>& corpus, const BenchmarkConfig& cfg,
                                                const augment::Resources& res, std::vector<std::string>* warnings) {
  cfg.validate();
  require(!corpus.empty(), ErrorKind::kEmptyInput, "benchmark corpus is empty");
  std::map<std::string, std::vector<std::size_t>> by_lang;
  std::vector<std::u32string> texts(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    texts[i] = utf8::decode(corpus[i].text);
    const std::string lang = corpus[i].lang.empty() ? "und" : corpus[i].lang;
    if (texts[i].size() >= cfg.min_len) by_lang[lang].push_back(i);
    else if (warnings)
      warnings->push_back("skipping " + corpus[i].id + ": shorter than " + std::to_string(cfg.min_len) + " characters");
  }

  std::vector<BenchmarkRecord> out;
  for (auto& [lang, pool] : by_lang) {
    Rng rng(derive_seed(cfg.seed, fnv1a64(lang.data(), lang.size())));
    rng.shuffle(pool);
    std::size_t take = cfg.per_lang;
    if (pool.size() < take) {
      if (warnings)
        warnings->push_back("language " + lang + " has " + std::to_string(pool.size()) + " eligible texts, fewer than " +
                            std::to_string(cfg.per_lang));
      take = pool.size();
    }
    for (std::size_t n = 0; n < take; ++n) {
      const std::size_t doc = pool[n];
      const std::u32string& text = texts[doc];
      const auto len = static_cast<std::size_t>(
          rng.between(static_cast<std::int64_t>(cfg.min_len), static_cast<std::int64_t>(cfg.max_len)));
      BenchmarkRecord rec;
      char id[32];
      std::snprintf(id, sizeof id, "%06zu", n);
      rec.pair_id = lang + "-" + id;
      rec.lang = lang;
      rec.target_text = text.substr(0, std::min(len, text.size()));
      rec.target_len = rec.target_text.size();

      augment::AugmentationPlan plan;
      const double sp = cfg.sentence_rate ? *cfg.sentence_rate : rng.uniform(0.0, cfg.max_sentence_rate);
      const double ps = cfg.paragraph_share ? *cfg.paragraph_share : rng.uniform();
      plan.paragraph_rate = sp * ps;
      plan.sentence_rate = sp * (1.0 - ps);
      plan.word_char_rate = cfg.word_char_rate ? *cfg.word_char_rate : rng.uniform(0.0, cfg.max_word_char_rate);
      plan.word_share = cfg.word_share ? *cfg.word_share : rng.uniform();
      plan.op_set = cfg.op_set;
      plan.language_hint = lang;
      plan.seed = rng.next_u64();
      rec.augmentation = augment::augment(rec.target_text, plan, res);
      rec.query_text = rec.augmentation.augmented;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::string benchmark_record_json(const BenchmarkRecord& r) {
  json ops = json::array();
  for (const auto& op : r.augmentation.applied_ops)
    ops.push_back({{"level", augment::to_string(op.level)},
                   {"category", augment::to_string(op.category)},
                   {"name", op.name},
                   {"position", op.position},
                   {"edit", augment::to_string(op.edit)},
                   {"span", op.span},
                   {"payload", utf8::encode(op.payload)}});
  const auto& a = r.augmentation;
  return json{{"pair_id", r.pair_id},
              {"lang", r.lang},
              {"target_len", r.target_len},
              {"target_text", utf8::encode(r.target_text)},
              {"query_text", utf8::encode(r.query_text)},
              {"augmentation",
               {{"paragraph_rate", a.paragraph_rate},
                {"sentence_rate", a.sentence_rate},
                {"word_rate", a.word_rate},
                {"char_rate", a.char_rate},
                {"ops", ops}}}}
      .dump();
}

void write_benchmark_jsonl(const std::string& path, const std::vector<BenchmarkRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write benchmark: " + path);
  for (const auto& r : records) out << benchmark_record_json(r) << '\n';
}

std::vector<BenchmarkRecord> read_benchmark_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kInvalidArgument, "cannot open benchmark: " + path);
  std::vector<BenchmarkRecord> out;
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      BenchmarkRecord r;
      r.pair_id = j.at("pair_id").get<std::string>();
      r.lang = j.value("lang", "");
      r.target_text = utf8::decode(j.at("target_text").get<std::string>());
      r.query_text = utf8::decode(j.at("query_text").get<std::string>());
      r.target_len = j.value("target_len", r.target_text.size());
      require(r.target_len == r.target_text.size(), ErrorKind::kIntegrity,
              "target_len disagrees with target_text at line " + std::to_string(lineno));
      auto& a = r.augmentation;
      a.original = r.target_text;
      a.augmented = r.query_text;
      if (j.contains("augmentation")) {
        const auto& aj = j["augmentation"];
        a.paragraph_rate = aj.value("paragraph_rate", 0.0);
        a.sentence_rate = aj.value("sentence_rate", 0.0);
        a.word_rate = aj.value("word_rate", 0.0);
        a.char_rate = aj.value("char_rate", 0.0);
        for (const auto& o : aj.value("ops", json::array())) {
          augment::AppliedOp op{augment::parse_level(o.at("level").get<std::string>()),
                                augment::parse_category(o.at("category").get<std::string>()),
                                o.at("name").get<std::string>(),
                                o.at("position").get<std::size_t>(),
                                augment::parse_edit(o.at("edit").get<std::string>()),
                                o.value("span", std::size_t{1}),
                                utf8::decode(o.value("payload", std::string()))};
          a.applied_ops.push_back(std::move(op));
        }
      }
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
  }
  return out;
}

}  // namespace dupsim
