// dupsim: near-duplicate detection pipeline from the command line.
//
// Exit codes: 0 success, 2 usage or input error, 3 numeric or integrity error.
// Logs go to stderr; data goes to --out; every command also writes a JSON
// summary next to its output (<out>.summary.json).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dupsim/augment.hpp"
#include "dupsim/benchmark.hpp"
#include "dupsim/cluster.hpp"
#include "dupsim/corpus.hpp"
#include "dupsim/dedup.hpp"
#include "dupsim/embedder.hpp"
#include "dupsim/error.hpp"
#include "dupsim/kernels.hpp"
#include "dupsim/kvconfig.hpp"
#include "dupsim/lsh.hpp"
#include "dupsim/metrics.hpp"
#include "dupsim/params.hpp"
#include "dupsim/retrieval.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/simindex.hpp"
#include "dupsim/training.hpp"
#include "dupsim/utf8.hpp"

namespace {

using nlohmann::json;
using namespace dupsim;

constexpr std::uint64_t kDefaultSeed = 0x5eed;

struct Global {
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 1;
  std::string log_level = "info";
  std::string format;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kEmptyInput:
    case ErrorKind::kInvalidCodepoint:
    case ErrorKind::kOversize: return 2;
    default: return 3;
  }
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  return hex64(fnv1a64(bytes.data(), bytes.size()));
}

std::vector<CorpusDoc> read_corpus(const std::string& path) {
  auto docs = read_corpus_jsonl(path);
  require(!docs.empty(), ErrorKind::kEmptyInput, "corpus is empty: " + path);
  return docs;
}

void write_summary(const std::string& out, json summary) {
  const std::string path = out + ".summary.json";
  std::ofstream f(path);
  require(static_cast<bool>(f), ErrorKind::kInvalidArgument, "cannot write summary: " + path);
  f << summary.dump(2) << '\n';
  spdlog::info("summary written to {}", path);
}

std::optional<dedup::Threshold> read_threshold(const std::optional<double>& value, const std::string& kind,
                                               bool required) {
  if (!value && kind.empty()) {
    require(!required, ErrorKind::kInvalidArgument, "--threshold and --threshold-kind are required");
    return std::nullopt;
  }
  require(value.has_value(), ErrorKind::kInvalidArgument, "--threshold-kind given without --threshold");
  require(!kind.empty(), ErrorKind::kInvalidArgument,
          "--threshold needs an explicit --threshold-kind {similarity, distance, jaccard, hamming}");
  return dedup::Threshold{dedup::parse_threshold_kind(kind), *value};
}

std::vector<std::size_t> parse_size_list(const std::string& flag, const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(kv::parse_size(flag, item));
  require(!out.empty(), ErrorKind::kInvalidArgument, flag + " is empty");
  return out;
}

std::vector<double> parse_double_list(const std::string& flag, const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(kv::parse_double(flag, item));
  require(!out.empty(), ErrorKind::kInvalidArgument, flag + " is empty");
  return out;
}

// ---------------------------------------------------------------- hashing

struct HashOpts {
  std::string preset = "default";
  std::optional<std::size_t> num_hashes, ngram_size, bands, rows;
  std::string ngram_level;
  std::optional<double> lsh_threshold;
};

void add_hash_options(CLI::App* sub, HashOpts& o) {
  sub->add_option("--preset", o.preset, "minhash preset: default (10 hashes) or dedup (256 hashes, LSH for J=0.8)")
      ->check(CLI::IsMember({"default", "dedup"}));
  sub->add_option("--num-hashes", o.num_hashes, "MinHash signature length");
  sub->add_option("--ngram-size", o.ngram_size, "shingle size");
  sub->add_option("--ngram-level", o.ngram_level, "word or char shingles")->check(CLI::IsMember({"word", "char"}));
  sub->add_option("--bands", o.bands, "LSH bands");
  sub->add_option("--rows", o.rows, "LSH rows per band");
  sub->add_option("--lsh-threshold", o.lsh_threshold, "pick bands/rows for this Jaccard threshold");
}

lsh::HashConfig make_hash_config(lsh::HashKind kind, const HashOpts& o) {
  lsh::HashConfig c = kind == lsh::HashKind::kSimHash ? lsh::HashConfig::simhash_default()
                      : o.preset == "dedup"           ? lsh::HashConfig::minhash_dedup()
                                                      : lsh::HashConfig::minhash_default();
  if (o.num_hashes) {
    require(kind == lsh::HashKind::kMinHash, ErrorKind::kInvalidArgument, "--num-hashes applies to minhash only");
    c.num_hashes = *o.num_hashes;
    c.lsh_bands = c.lsh_rows = 0;
  }
  if (o.ngram_size) c.ngram_size = *o.ngram_size;
  if (!o.ngram_level.empty()) c.ngram_level = lsh::parse_ngram_level(o.ngram_level);
  if (o.lsh_threshold) {
    require(kind == lsh::HashKind::kMinHash, ErrorKind::kInvalidArgument, "--lsh-threshold applies to minhash only");
    std::tie(c.lsh_bands, c.lsh_rows) = lsh::optimal_bands(*o.lsh_threshold, c.num_hashes);
  }
  if (o.bands || o.rows) {
    require(o.bands && o.rows, ErrorKind::kInvalidArgument, "--bands and --rows go together");
    c.lsh_bands = *o.bands;
    c.lsh_rows = *o.rows;
  }
  c.validate();
  return c;
}

json hash_config_json(const lsh::HashConfig& c) {
  return {{"kind", lsh::to_string(c.kind)},       {"num_hashes", c.num_hashes}, {"ngram_size", c.ngram_size},
          {"ngram_level", lsh::to_string(c.ngram_level)}, {"lsh_bands", c.lsh_bands}, {"lsh_rows", c.lsh_rows}};
}

// ---------------------------------------------------------------- inputs

struct InputOpts {
  std::string corpus;
  std::string weights;
  std::string embeddings;
  std::string signatures;
  HashOpts hash;
};

void add_input_options(CLI::App* sub, InputOpts& o, const std::string& corpus_flag = "--in") {
  sub->add_option(corpus_flag, o.corpus, "corpus JSONL {id, text, lang?, cluster?}");
  sub->add_option("--weights", o.weights, "model weights (near/partial)");
  sub->add_option("--embeddings", o.embeddings, "precomputed embeddings instead of --weights (near/partial)");
  sub->add_option("--signatures", o.signatures, "precomputed signatures instead of hashing (minhash/simhash)");
  add_hash_options(sub, o.hash);
}

dedup::Representation load_representation(dedup::Method method, const InputOpts& o, const Global& g,
                                          std::vector<CorpusDoc>* docs_out = nullptr) {
  std::vector<CorpusDoc> docs;
  if (!o.corpus.empty()) {
    docs = read_corpus(o.corpus);
    spdlog::info("read {} documents from {}", docs.size(), o.corpus);
  }
  dedup::Representation rep;
  const bool embedding = method == dedup::Method::kNearDup || method == dedup::Method::kPartialDup;
  if (embedding) {
    if (!o.embeddings.empty()) {
      auto grouped = group_entries(read_embeddings(o.embeddings));
      rep.method = method;
      for (auto& d : grouped) {
        rep.ids.push_back(d.id);
        rep.embeddings.push_back(std::move(d.embedding));
      }
    } else {
      require(!o.weights.empty(), ErrorKind::kInvalidArgument, "near/partial need --weights or --embeddings");
      require(!o.corpus.empty(), ErrorKind::kInvalidArgument, "--weights needs a corpus to embed");
      const Embedder embedder(load_params(o.weights));
      rep = dedup::represent_embeddings(docs, method, embedder, g.threads);
    }
  } else if (!o.signatures.empty()) {
    auto file = lsh::read_signatures(o.signatures);
    require((file.config.kind == lsh::HashKind::kMinHash) == (method == dedup::Method::kMinHash),
            ErrorKind::kInvalidArgument, "signature file kind does not match --method");
    rep.method = method;
    rep.hash_config = file.config;
    for (auto& r : file.records) {
      rep.ids.push_back(r.id);
      rep.signatures.push_back(r.sig);
    }
  } else {
    require(!o.corpus.empty(), ErrorKind::kInvalidArgument, "hash methods need a corpus or --signatures");
    const auto kind = method == dedup::Method::kMinHash ? lsh::HashKind::kMinHash : lsh::HashKind::kSimHash;
    rep = dedup::represent_hashes(docs, make_hash_config(kind, o.hash), g.seed);
  }
  if (docs_out) *docs_out = std::move(docs);
  return rep;
}

// ---------------------------------------------------------------- commands

struct GenOpts {
  std::string corpus, out, homoglyphs, qwerty;
  BenchmarkConfig cfg;
  std::optional<double> sentence_rate, paragraph_share, word_char_rate, word_share;
};

void cmd_gen_benchmark(GenOpts& o, const Global& g) {
  auto corpus = read_corpus(o.corpus);
  auto res = augment::Resources::from_corpus(corpus);
  if (!o.homoglyphs.empty()) res.load_homoglyphs(o.homoglyphs);
  if (!o.qwerty.empty()) res.load_qwerty(o.qwerty);
  o.cfg.seed = g.seed;
  o.cfg.sentence_rate = o.sentence_rate;
  o.cfg.paragraph_share = o.paragraph_share;
  o.cfg.word_char_rate = o.word_char_rate;
  o.cfg.word_share = o.word_share;
  std::vector<std::string> warnings;
  const auto records = generate_benchmark(corpus, o.cfg, res, &warnings);
  for (const auto& w : warnings) spdlog::warn("{}", w);
  write_benchmark_jsonl(o.out, records);
  std::map<std::string, std::size_t> per_lang;
  for (const auto& r : records) ++per_lang[r.lang];
  std::cout << std::left << std::setw(12) << "lang" << "records\n";
  for (const auto& [lang, n] : per_lang) std::cout << std::setw(12) << lang << n << '\n';
  std::cout << std::setw(12) << "total" << records.size() << '\n';
  write_summary(o.out, {{"command", "gen-benchmark"},
                        {"seed", g.seed},
                        {"config",
                         {{"per_lang", o.cfg.per_lang},
                          {"min_len", o.cfg.min_len},
                          {"max_len", o.cfg.max_len},
                          {"max_sentence_rate", o.cfg.max_sentence_rate},
                          {"max_word_char_rate", o.cfg.max_word_char_rate}}},
                        {"records", records.size()},
                        {"per_lang", per_lang},
                        {"warnings", warnings},
                        {"checksum", file_checksum(o.out)}});
}

struct TrainOpts {
  std::string corpus, config, out, metrics;
  std::optional<std::size_t> steps;
  std::vector<std::string> set;
};

TrainConfig build_train_config(const std::string& config_path, const std::vector<std::string>& sets,
                               std::optional<std::size_t> steps, const Global& g, bool seed_given) {
  kv::Map values;
  if (!config_path.empty()) values = kv::read_file(config_path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    require(eq != std::string::npos, ErrorKind::kInvalidArgument, "--set expects key=value, got " + s);
    values[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (steps) {
    require(*steps >= 1, ErrorKind::kInvalidArgument, "--steps must be >= 1");
    values["total_steps"] = std::to_string(*steps);
  }
  if (seed_given || !values.count("seed")) values["seed"] = std::to_string(g.seed);
  values["threads"] = std::to_string(g.threads);
  TrainConfig cfg = TrainConfig::from_kv(values);
  cfg.validate();
  return cfg;
}

void cmd_train(TrainOpts& o, const Global& g, bool seed_given) {
  const TrainConfig cfg = build_train_config(o.config, o.set, o.steps, g, seed_given);
  const auto corpus = read_corpus(o.corpus);
  const auto res = augment::Resources::from_corpus(corpus);
  spdlog::info("training {} steps, batch {}, seed {}, {} parameters", cfg.opt.total_steps, cfg.opt.batch_size,
               cfg.seed, ModelParams(cfg.model).parameter_count());
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train(corpus, cfg, res, [](const TrainLogRow& r) {
    spdlog::info("step {} lr {:.6g} loss {:.6f}", r.step, r.lr, r.loss);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_params(result.params, o.out);
  const std::string metrics_path = o.metrics.empty() ? o.out + ".metrics.csv" : o.metrics;
  write_metrics_csv(metrics_path, result.log);
  std::cout << "steps " << cfg.opt.total_steps << "\nfinal_loss " << result.losses.back() << "\nseconds " << secs
            << "\nweights " << o.out << '\n';
  write_summary(o.out, {{"command", "train"},
                        {"config", cfg.to_kv()},
                        {"final_loss", result.losses.back()},
                        {"initial_loss", result.losses.front()},
                        {"seconds", secs},
                        {"metrics_csv", metrics_path},
                        {"checksum", file_checksum(o.out)}});
}

struct EmbedOpts {
  std::string weights, in, out, mode = "near";
};

void cmd_embed(EmbedOpts& o, const Global& g) {
  const MatchMode mode = parse_match_mode(o.mode);
  const Embedder embedder(load_params(o.weights));
  const auto docs = read_corpus(o.in);
  const auto embedded = embed_documents(docs, embedder, g.threads);
  const auto entries = match_entries(embedded, mode);
  const std::string format = g.format.empty() ? "binary" : g.format;
  require(format == "binary" || format == "jsonl", ErrorKind::kInvalidArgument,
          "embed writes --format binary or jsonl");
  if (format == "binary") write_embeddings_binary(o.out, entries);
  else write_embeddings_jsonl(o.out, entries);
  std::cout << "documents " << docs.size() << "\nvectors " << entries.size() << "\ndim "
            << embedder.config().embedding_dim << '\n';
  write_summary(o.out, {{"command", "embed"},
                        {"mode", to_string(mode)},
                        {"format", format},
                        {"documents", docs.size()},
                        {"vectors", entries.size()},
                        {"isa", kernels::isa_name(kernels::active_isa())},
                        {"checksum", file_checksum(o.out)}});
}

struct HashCmdOpts {
  std::string kind = "minhash", in, out;
  HashOpts hash;
};

void cmd_hash(HashCmdOpts& o, const Global& g) {
  const auto cfg = make_hash_config(lsh::parse_hash_kind(o.kind), o.hash);
  const auto docs = read_corpus(o.in);
  lsh::SignatureFile file{cfg, g.seed, {}};
  for (const auto& d : docs) file.records.push_back({d.id, lsh::signature(utf8::decode(d.text), cfg, g.seed)});
  lsh::write_signatures(o.out, file);
  std::cout << "documents " << docs.size() << "\nkind " << o.kind << "\nnum_hashes " << cfg.num_hashes << '\n';
  write_summary(o.out, {{"command", "hash"},
                        {"config", hash_config_json(cfg)},
                        {"seed", g.seed},
                        {"documents", docs.size()},
                        {"checksum", file_checksum(o.out)}});
}

struct DedupOpts {
  std::string method, out, threshold_kind, reference;
  std::optional<double> threshold;
  InputOpts input;
};

void cmd_dedup(DedupOpts& o, const Global& g) {
  const auto method = dedup::parse_method(o.method);
  const auto thr = *read_threshold(o.threshold, o.threshold_kind, true);
  dedup::check_threshold(method, thr);
  const auto rep = load_representation(method, o.input, g);
  dedup::DedupReport report;
  if (!o.reference.empty()) {
    InputOpts ref = o.input;
    ref.corpus = o.reference;
    ref.embeddings.clear();
    ref.signatures.clear();
    const auto ref_rep = load_representation(method, ref, g);
    report = dedup::dedup_cross(ref_rep, rep, thr);
  } else {
    report = dedup::dedup_corpus(rep, thr);
  }
  {
    std::ofstream out(o.out, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write report: " + o.out);
    for (const auto& p : report.pairs)
      out << json{{"id", p.duplicate_id}, {"match", p.matched_id}, {"score", p.score}}.dump() << '\n';
  }
  std::cout << "method " << o.method << "\nthreshold " << thr.value << " (" << dedup::to_string(thr.kind)
            << ")\ndocuments " << report.total << "\nduplicates " << report.duplicates << "\ndedup_rate "
            << report.dedup_rate << '\n';
  write_summary(o.out, {{"command", "dedup"},
                        {"method", o.method},
                        {"config",
                         {{"threshold", thr.value},
                          {"threshold_kind", dedup::to_string(thr.kind)},
                          {"cross_split", !o.reference.empty()}}},
                        {"metrics", {{"documents", report.total}, {"duplicates", report.duplicates}, {"dedup_rate", report.dedup_rate}}},
                        {"checksum", file_checksum(o.out)}});
}

struct ClusterOpts {
  std::string method, out, threshold_kind, linkage = "components", sweep_out, thresholds;
  std::optional<double> threshold;
  bool sweep = false;
  InputOpts input;
};

json pairwise_json(const metrics::PairwiseMetrics& m) {
  return {{"precision", m.duplicate.precision}, {"recall", m.duplicate.recall}, {"f1", m.duplicate.f1},
          {"macro_f1", m.macro_f1},           {"accuracy", m.accuracy}};
}

void cmd_cluster(ClusterOpts& o, const Global& g) {
  const auto method = dedup::parse_method(o.method);
  const auto linkage = cluster::parse_linkage(o.linkage);
  std::vector<CorpusDoc> docs;
  const auto rep = load_representation(method, o.input, g, &docs);
  require(rep.size() > 0, ErrorKind::kEmptyInput, "nothing to cluster");

  std::optional<metrics::Labels> gold;
  if (!docs.empty() && std::all_of(docs.begin(), docs.end(), [](const CorpusDoc& d) { return !d.cluster.empty(); })) {
    require(docs.size() == rep.size(), ErrorKind::kInvalidArgument, "corpus and representation sizes differ");
    std::map<std::string, std::int64_t> ids;
    metrics::Labels labels;
    for (const auto& d : docs) labels.push_back(ids.emplace(d.cluster, static_cast<std::int64_t>(ids.size())).first->second);
    gold = labels;
  }

  json summary{{"command", "cluster"}, {"method", o.method}, {"linkage", cluster::to_string(linkage)}};
  if (o.sweep) {
    require(gold.has_value(), ErrorKind::kInvalidArgument, "--sweep needs gold cluster labels in the corpus");
    require(!o.threshold_kind.empty(), ErrorKind::kInvalidArgument, "--sweep needs --threshold-kind");
    const auto kind = dedup::parse_threshold_kind(o.threshold_kind);
    const auto grid = o.thresholds.empty() ? dedup::default_grid(kind) : parse_double_list("--thresholds", o.thresholds);
    for (double v : grid) dedup::check_threshold(method, {kind, v});
    const auto sweep = dedup::threshold_sweep(rep, *gold, kind, grid, linkage);
    const std::string csv = o.sweep_out.empty() ? o.out : o.sweep_out;
    dedup::write_sweep_csv(csv, sweep);
    std::cout << "best_threshold " << sweep.best_threshold << " (" << o.threshold_kind << ")\nbest_f1 "
              << sweep.best_f1 << '\n';
    summary["config"] = {{"threshold_kind", o.threshold_kind}, {"thresholds", grid.size()}};
    summary["metrics"] = {{"best_threshold", sweep.best_threshold}, {"best_f1", sweep.best_f1}};
    summary["checksum"] = file_checksum(csv);
    write_summary(csv, summary);
    return;
  }

  const auto thr = *read_threshold(o.threshold, o.threshold_kind, true);
  const auto labels = dedup::cluster_documents(rep, linkage, thr);
  {
    std::ofstream out(o.out, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write labels: " + o.out);
    for (std::size_t i = 0; i < rep.size(); ++i) out << json{{"id", rep.ids[i]}, {"cluster", labels[i]}}.dump() << '\n';
  }
  const std::size_t clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::cout << "documents " << rep.size() << "\nclusters " << clusters << '\n';
  summary["config"] = {{"threshold", thr.value}, {"threshold_kind", dedup::to_string(thr.kind)}};
  json m{{"documents", rep.size()}, {"clusters", clusters}};
  if (gold) {
    const metrics::Labels pred(labels.begin(), labels.end());
    const auto v = metrics::v_measure(pred, *gold);
    const double ari = metrics::adjusted_rand_index(pred, *gold);
    m["ari"] = ari;
    m["homogeneity"] = v.homogeneity;
    m["completeness"] = v.completeness;
    m["v_measure"] = v.v;
    if (rep.size() >= 2)
      m["pairwise"] = pairwise_json(
          metrics::pairwise_classification(metrics::same_cluster_pairs(pred), metrics::same_cluster_pairs(*gold)));
    std::cout << "ari " << ari << "\nhomogeneity " << v.homogeneity << "\ncompleteness " << v.completeness
              << "\nv_measure " << v.v << '\n';
  }
  summary["metrics"] = m;
  summary["checksum"] = file_checksum(o.out);
  write_summary(o.out, summary);
}

struct EvalOpts {
  std::string method, benchmark, weights, target_embeddings, query_embeddings, out, ks = "1,5,10";
  HashOpts hash;
};

void cmd_eval(EvalOpts& o, const Global& g) {
  const auto method = dedup::parse_method(o.method);
  const auto ks = parse_size_list("--k", o.ks);
  RetrievalReport report;
  json config;
  if (!o.target_embeddings.empty() || !o.query_embeddings.empty()) {
    require(!o.target_embeddings.empty() && !o.query_embeddings.empty(), ErrorKind::kInvalidArgument,
            "--target-embeddings and --query-embeddings go together");
    require(method == dedup::Method::kNearDup || method == dedup::Method::kPartialDup, ErrorKind::kInvalidArgument,
            "embedding files are evaluated with --method near or partial");
    const auto mode = method == dedup::Method::kNearDup ? MatchMode::kNearDup : MatchMode::kPartialDup;
    report = eval_retrieval_embeddings(group_entries(read_embeddings(o.target_embeddings)),
                                       group_entries(read_embeddings(o.query_embeddings)), mode, ks);
    config = {{"target_embeddings", o.target_embeddings}, {"query_embeddings", o.query_embeddings}};
  } else {
    const auto records = read_benchmark_jsonl(o.benchmark);
    spdlog::info("read {} benchmark records", records.size());
    if (method == dedup::Method::kNearDup || method == dedup::Method::kPartialDup) {
      require(!o.weights.empty(), ErrorKind::kInvalidArgument, "near/partial evaluation needs --weights");
      const Embedder embedder(load_params(o.weights));
      const auto mode = method == dedup::Method::kNearDup ? MatchMode::kNearDup : MatchMode::kPartialDup;
      report = eval_retrieval_model(records, embedder, mode, ks, g.threads);
      config = {{"weights", o.weights}};
    } else {
      const auto kind = method == dedup::Method::kMinHash ? lsh::HashKind::kMinHash : lsh::HashKind::kSimHash;
      const auto cfg = make_hash_config(kind, o.hash);
      report = eval_retrieval_hashes(records, cfg, g.seed, ks);
      config = hash_config_json(cfg);
      config["seed"] = g.seed;
    }
  }
  json recall;
  std::cout << "method " << o.method << "\nqueries " << report.queries << '\n';
  for (const auto& [k, v] : report.recall_at_k) {
    std::cout << "recall@" << k << ' ' << v << '\n';
    recall[std::to_string(k)] = v;
  }
  const std::string out = o.out.empty() ? (o.benchmark.empty() ? o.query_embeddings : o.benchmark) + ".eval" : o.out;
  {
    std::ofstream csv(out);
    require(static_cast<bool>(csv), ErrorKind::kInvalidArgument, "cannot write report: " + out);
    csv << "method,k,recall\n";
    for (const auto& [k, v] : report.recall_at_k) csv << o.method << ',' << k << ',' << kv::format_double(v) << '\n';
  }
  write_summary(out, {{"command", "eval"},
                      {"method", o.method},
                      {"config", config},
                      {"metrics", {{"queries", report.queries}, {"recall_at_k", recall}}},
                      {"checksum", file_checksum(out)}});
}

struct AblateOpts {
  std::string grid, corpus, out, config, benchmark;
  std::size_t eval_per_lang = 50;
};

// Grid file: key=v1,v2,... lines; rows are the cartesian product in key order.
std::vector<kv::Map> expand_grid(const kv::Map& grid) {
  std::vector<kv::Map> rows{{}};
  for (const auto& [key, csv] : grid) {
    std::vector<std::string> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(item);
    require(!values.empty(), ErrorKind::kInvalidArgument, "grid key " + key + " has no values");
    std::vector<kv::Map> next;
    for (const auto& row : rows)
      for (const auto& v : values) {
        auto r = row;
        r[key] = v;
        next.push_back(std::move(r));
      }
    rows = std::move(next);
  }
  return rows;
}

void cmd_ablate(AblateOpts& o, const Global& g) {
  const kv::Map grid = kv::read_file(o.grid);
  require(!grid.empty(), ErrorKind::kInvalidArgument, "grid file is empty");
  const auto rows = expand_grid(grid);
  const auto corpus = read_corpus(o.corpus);
  const auto res = augment::Resources::from_corpus(corpus);
  std::vector<BenchmarkRecord> bench;
  if (!o.benchmark.empty()) {
    bench = read_benchmark_jsonl(o.benchmark);
  } else {
    BenchmarkConfig bc;
    bc.per_lang = o.eval_per_lang;
    bc.seed = derive_seed(g.seed, 0xbe4c);
    bench = generate_benchmark(corpus, bc, res);
  }
  const kv::Map base = o.config.empty() ? kv::Map{} : kv::read_file(o.config);

  std::ofstream csv(o.out);
  require(static_cast<bool>(csv), ErrorKind::kInvalidArgument, "cannot write ablation table: " + o.out);
  csv << "row,seed";
  for (const auto& [k, v] : grid) csv << ',' << k;
  csv << ",parameters,final_loss,recall_at_1\n";
  json summary_rows = json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    kv::Map values = base;
    for (const auto& [k, v] : rows[r]) values[k] = v;
    const std::uint64_t seed = derive_seed(g.seed, r);
    values["seed"] = std::to_string(seed);
    values["threads"] = std::to_string(g.threads);
    const TrainConfig cfg = TrainConfig::from_kv(values);
    spdlog::info("ablation row {}/{} (seed {})", r + 1, rows.size(), seed);
    const auto result = train(corpus, cfg, res);
    const Embedder embedder(result.params);
    const auto report = eval_retrieval_model(bench, embedder, MatchMode::kNearDup, {1}, g.threads);
    csv << r << ',' << seed;
    for (const auto& [k, v] : rows[r]) csv << ',' << v;
    csv << ',' << result.params.parameter_count() << ',' << kv::format_double(result.losses.back()) << ','
        << kv::format_double(report.recall_at_k.at(1)) << '\n';
    std::cout << "row " << r << " recall@1 " << report.recall_at_k.at(1) << '\n';
    summary_rows.push_back({{"row", r}, {"seed", seed}, {"values", rows[r]}, {"recall_at_1", report.recall_at_k.at(1)},
                            {"final_loss", result.losses.back()}});
  }
  csv.close();
  write_summary(o.out, {{"command", "ablate"}, {"rows", summary_rows}, {"checksum", file_checksum(o.out)}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dupsim: near-duplicate text detection with learned embeddings and hash baselines"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  std::string isa;
  auto* seed_opt = app.add_option("--seed", g.seed, "random seed (default 0x5eed, logged)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.add_option("--format", g.format, "output format where a command supports several")
      ->check(CLI::IsMember({"jsonl", "binary", "csv"}));
  app.add_option("--isa", isa, "force kernel variant: scalar, avx2 or neon");

  GenOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-benchmark", "generate an adversarial retrieval benchmark");
  gen_cmd->add_option("--corpus", gen.corpus, "corpus JSONL")->required();
  gen_cmd->add_option("--out", gen.out, "benchmark JSONL")->required();
  gen_cmd->add_option("--per-lang", gen.cfg.per_lang, "texts per language");
  gen_cmd->add_option("--min-len", gen.cfg.min_len, "shortest target");
  gen_cmd->add_option("--max-len", gen.cfg.max_len, "longest target");
  gen_cmd->add_option("--max-sentence-rate", gen.cfg.max_sentence_rate, "upper bound of the paragraph+sentence rate");
  gen_cmd->add_option("--max-word-char-rate", gen.cfg.max_word_char_rate, "upper bound of the word+char rate");
  gen_cmd->add_option("--sentence-rate", gen.sentence_rate, "fixed paragraph+sentence rate");
  gen_cmd->add_option("--paragraph-share", gen.paragraph_share, "fixed paragraph share of that rate");
  gen_cmd->add_option("--word-char-rate", gen.word_char_rate, "fixed word+char rate");
  gen_cmd->add_option("--word-share", gen.word_share, "fixed word share of that rate (0 = characters only)");
  gen_cmd->add_option("--homoglyphs", gen.homoglyphs, "homoglyph table TSV");
  gen_cmd->add_option("--qwerty", gen.qwerty, "keyboard adjacency TSV");

  TrainOpts tr;
  auto* train_cmd = app.add_subcommand("train", "train an embedding model");
  train_cmd->add_option("--corpus", tr.corpus, "corpus JSONL")->required();
  train_cmd->add_option("--config", tr.config, "key=value training config");
  train_cmd->add_option("--set", tr.set, "override a config key (key=value), repeatable");
  train_cmd->add_option("--steps", tr.steps, "total steps (overrides the config)");
  train_cmd->add_option("--out", tr.out, "weights file")->required();
  train_cmd->add_option("--metrics", tr.metrics, "metrics CSV (default <out>.metrics.csv)");

  EmbedOpts em;
  auto* embed_cmd = app.add_subcommand("embed", "embed a corpus");
  embed_cmd->add_option("--weights", em.weights, "weights file")->required();
  embed_cmd->add_option("--in", em.in, "corpus JSONL")->required();
  embed_cmd->add_option("--out", em.out, "embedding file")->required();
  embed_cmd->add_option("--mode", em.mode, "near (one vector per doc) or partial (one per chunk)")
      ->check(CLI::IsMember({"near", "partial"}));

  HashCmdOpts hs;
  auto* hash_cmd = app.add_subcommand("hash", "compute MinHash or SimHash signatures");
  hash_cmd->add_option("--kind", hs.kind, "minhash or simhash")->check(CLI::IsMember({"minhash", "simhash"}));
  hash_cmd->add_option("--in", hs.in, "corpus JSONL")->required();
  hash_cmd->add_option("--out", hs.out, "signature JSONL")->required();
  add_hash_options(hash_cmd, hs.hash);

  DedupOpts dd;
  auto* dedup_cmd = app.add_subcommand("dedup", "keep-first deduplication or cross-split duplicate rate");
  dedup_cmd->add_option("--method", dd.method, "near, partial, minhash or simhash")->required();
  dedup_cmd->add_option("--threshold", dd.threshold, "match threshold");
  dedup_cmd->add_option("--threshold-kind", dd.threshold_kind, "similarity, distance, jaccard or hamming");
  dedup_cmd->add_option("--reference", dd.reference, "reference split corpus; reports the share of --in matched in it");
  dedup_cmd->add_option("--out", dd.out, "duplicate pairs JSONL")->required();
  add_input_options(dedup_cmd, dd.input);

  ClusterOpts cl;
  auto* cluster_cmd = app.add_subcommand("cluster", "threshold clustering, optionally a threshold sweep");
  cluster_cmd->add_option("--method", cl.method, "near, partial, minhash or simhash")->required();
  cluster_cmd->add_option("--threshold", cl.threshold, "merge threshold");
  cluster_cmd->add_option("--threshold-kind", cl.threshold_kind, "similarity, distance, jaccard or hamming");
  cluster_cmd->add_option("--linkage", cl.linkage, "components or average")
      ->check(CLI::IsMember({"components", "average"}));
  cluster_cmd->add_flag("--sweep", cl.sweep, "sweep thresholds against the corpus cluster labels");
  cluster_cmd->add_option("--thresholds", cl.thresholds, "comma-separated sweep grid (default 0.01 steps)");
  cluster_cmd->add_option("--sweep-out", cl.sweep_out, "sweep CSV (default --out)");
  cluster_cmd->add_option("--out", cl.out, "labels JSONL")->required();
  add_input_options(cluster_cmd, cl.input);

  EvalOpts ev;
  auto* eval_cmd = app.add_subcommand("eval", "Recall@k on a benchmark");
  eval_cmd->add_option("--method", ev.method, "near, partial, minhash or simhash")->required();
  eval_cmd->add_option("--benchmark", ev.benchmark, "benchmark JSONL");
  eval_cmd->add_option("--weights", ev.weights, "weights file (near/partial)");
  eval_cmd->add_option("--target-embeddings", ev.target_embeddings, "external target embeddings (ids = pair ids)");
  eval_cmd->add_option("--query-embeddings", ev.query_embeddings, "external query embeddings (ids = pair ids)");
  eval_cmd->add_option("--k", ev.ks, "comma-separated k values");
  eval_cmd->add_option("--out", ev.out, "recall CSV (default <benchmark>.eval)");
  add_hash_options(eval_cmd, ev.hash);

  AblateOpts ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and evaluate over a config grid");
  ablate_cmd->add_option("--grid", ab.grid, "grid file, key=v1,v2 per line")->required();
  ablate_cmd->add_option("--corpus", ab.corpus, "training corpus JSONL")->required();
  ablate_cmd->add_option("--config", ab.config, "base training config");
  ablate_cmd->add_option("--benchmark", ab.benchmark, "evaluation benchmark (default: generated from the corpus)");
  ablate_cmd->add_option("--eval-per-lang", ab.eval_per_lang, "generated benchmark size per language");
  ablate_cmd->add_option("--out", ab.out, "CSV table")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_st("dupsim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (!isa.empty()) {
      kernels::Isa want;
      require(kernels::parse_isa(isa, want), ErrorKind::kInvalidArgument, "unknown --isa " + isa);
      require(kernels::force_isa(want), ErrorKind::kInvalidArgument, "kernel variant " + isa + " is unavailable");
    }
    const bool seed_given = seed_opt->count() > 0;
    spdlog::debug("seed {} threads {} kernels {}", g.seed, g.threads, kernels::isa_name(kernels::active_isa()));
    if (*gen_cmd) cmd_gen_benchmark(gen, g);
    else if (*train_cmd) cmd_train(tr, g, seed_given);
    else if (*embed_cmd) cmd_embed(em, g);
    else if (*hash_cmd) cmd_hash(hs, g);
    else if (*dedup_cmd) cmd_dedup(dd, g);
    else if (*cluster_cmd) cmd_cluster(cl, g);
    else if (*eval_cmd) cmd_eval(ev, g);
    else if (*ablate_cmd) cmd_ablate(ab, g);
  } catch (const Error& e) {
    spdlog::error("{} ({})", e.what(), to_string(e.kind()));
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
