// Acceptance checks: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "dupsim/augment.hpp"
#include "dupsim/benchmark.hpp"
#include "dupsim/dedup.hpp"
#include "dupsim/embedder.hpp"
#include "dupsim/error.hpp"
#include "dupsim/lsh.hpp"
#include "dupsim/metrics.hpp"
#include "dupsim/network.hpp"
#include "dupsim/params.hpp"
#include "dupsim/retrieval.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/simindex.hpp"
#include "dupsim/training.hpp"
#include "dupsim/utf8.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace dupsim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double rel_err(double a, double b, double floor) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor}); }

std::vector<std::vector<double>> random_unit(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& v : out) {
    double norm = 0;
    for (auto& x : v) {
      x = rng.uniform(-1, 1);
      norm += x * x;
    }
    for (auto& x : v) x /= std::sqrt(norm);
  }
  return out;
}

std::u32string random_text(Rng& rng, std::size_t n) {
  std::u32string s;
  for (std::size_t i = 0; i < n; ++i)
    s += rng.bernoulli(0.8) ? static_cast<char32_t>(0x61 + rng.below(26)) : static_cast<char32_t>(0x400 + rng.below(200));
  return s;
}

template <class T>
void jitter(BasicParams<T>& p, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& t : p.tensors())
    for (auto& v : t.values) v += static_cast<T>(rng.uniform(-scale, scale));
}

std::vector<std::u32string> tokens(const std::string& prefix, std::size_t n) {
  std::vector<std::u32string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(utf8::decode(prefix + std::to_string(i)));
  return out;
}

// ---------------------------------------------------------------------------

Outcome parameter_count() {
  const ModelParams p(ModelConfig{});
  const double n = static_cast<double>(p.parameter_count());
  return {std::abs(n - 536000) / 536000 <= 0.05, fmt("%.0f parameters, %.2f%% from 536k", n, 100 * std::abs(n - 536000) / 536000)};
}

Outcome gradients() {
  double worst_loss = 0;
  Rng rng(201);
  const std::vector<std::uint64_t> cls{0, 0, 1, 1, 2, 2, 3, 3};
  const LossConfig lc;
  for (int batch = 0; batch < 20; ++batch) {
    auto e = random_unit(rng, 8, 16);
    // Pull each pair together so both mined sets are populated.
    for (std::size_t i = 1; i < 8; i += 2)
      for (std::size_t t = 0; t < 16; ++t) e[i][t] = 0.7 * e[i - 1][t] + 0.3 * e[i][t];
    const auto r = multi_similarity_loss(e, cls, lc);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t t = 0; t < 16; ++t) {
        const double h = 1e-6;
        auto p = e, m = e;
        p[i][t] += h;
        m[i][t] -= h;
        const double fd = (multi_similarity_loss(p, cls, lc).loss - multi_similarity_loss(m, cls, lc).loss) / (2 * h);
        worst_loss = std::max(worst_loss, rel_err(r.grad[i][t], fd, 1e-8));
      }
  }

  ModelConfig cfg;
  cfg.num_blocks = 1;
  cfg.hidden_dim = 16;
  cfg.attn_key_dim = 8;
  cfg.embedding_dim = 16;
  cfg.chunk_len = 16;
  double worst_model = 0;
  std::size_t checked = 0;
  for (auto pool : {Pooling::kGem, Pooling::kAverage, Pooling::kMax}) {
    cfg.pooling = pool;
    auto params = init_params(cfg, 202).cast<double>();
    jitter(params, 203, 0.05);
    const GauNetwork<double> net(cfg);
    Batch batch;
    for (std::uint64_t c = 0; c < 3; ++c)
      for (int view = 0; view < 2; ++view) {
        batch.inputs.push_back(textcodec::vectorize_chunk(random_text(rng, 4 + rng.below(13)), cfg.codec()));
        batch.class_ids.push_back(c);
      }
    LossConfig loss;
    loss.epsilon_mining = 10.0;  // every pair mined: the objective is smooth in the parameters
    const auto g = batch_gradient(net, params, batch, loss);
    for (std::size_t ti = 0; ti < params.tensors().size(); ++ti)
      for (int s = 0; s < 4; ++s) {
        const std::size_t idx = rng.below(params[ti].size());
        const double h = 1e-6;
        auto plus = params, minus = params;
        plus[ti].values[idx] += h;
        minus[ti].values[idx] -= h;
        const double fd =
            (batch_gradient(net, plus, batch, loss).loss - batch_gradient(net, minus, batch, loss).loss) / (2 * h);
        const double an = g.grads[ti].values[idx];
        if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
        worst_model = std::max(worst_model, rel_err(an, fd, 1e-6));
        ++checked;
      }
  }
  return {worst_loss <= 1e-4 && worst_model <= 1e-3 && checked > 30,
          fmt("loss grad max rel err %.2e (20 batches), model grad max rel err %.2e over %.0f params", worst_loss,
              worst_model, static_cast<double>(checked))};
}

// Unit vectors with the given Gram matrix (Cholesky rows).
std::vector<std::vector<double>> from_gram(const std::vector<double>& g, std::size_t n) {
  std::vector<std::vector<double>> l(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = g[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      l[i][j] = i == j ? std::sqrt(s) : s / l[j][j];
    }
  return l;
}

Outcome loss_fixtures() {
  const std::vector<std::vector<double>> sep{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
  const double zero = multi_similarity_loss(sep, {0, 0, 1, 1}, LossConfig{}).loss;
  const std::vector<double> gram{1, .5, .6, .2, .5, 1, .2, .6, .6, .2, 1, .5, .2, .6, .5, 1};
  const double mixed = multi_similarity_loss(from_gram(gram, 4), {0, 0, 1, 1}, LossConfig{}).loss;
  return {zero == 0.0 && std::abs(mixed - 0.2737) <= 1e-4, fmt("separated batch %.17g, 0.5/0.6 batch %.6f", zero, mixed)};
}

Outcome minhash_fidelity() {
  lsh::HashConfig cfg = lsh::HashConfig::minhash_default();
  cfg.num_hashes = 256;
  const double bound = 3.0 / std::sqrt(256.0);
  Rng rng(401);
  double worst_mean = 0;
  std::size_t trials = 0, within = 0;
  for (int pair = 0; pair < 20; ++pair) {
    const std::size_t shared = 20 + rng.below(200), only_a = rng.below(150), only_b = rng.below(150);
    const std::string tag = "p" + std::to_string(pair) + "-";
    auto a = tokens(tag + "s", shared), b = a;
    for (auto& t : tokens(tag + "a", only_a)) a.push_back(t);
    for (auto& t : tokens(tag + "b", only_b)) b.push_back(t);
    const double exact = static_cast<double>(shared) / static_cast<double>(shared + only_a + only_b);
    double sum = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const double est =
          lsh::estimate_jaccard(lsh::minhash_signature(a, cfg, seed), lsh::minhash_signature(b, cfg, seed));
      sum += est;
      ++trials;
      within += std::abs(est - exact) <= bound;
    }
    worst_mean = std::max(worst_mean, std::abs(sum / 200 - exact));
  }
  const double share = static_cast<double>(within) / static_cast<double>(trials);
  return {worst_mean <= 0.02 && share >= 0.99,
          fmt("max |mean - J| %.4f, %.2f%% of %.0f trials within 3/sqrt(k)", worst_mean, 100 * share,
              static_cast<double>(trials))};
}

Outcome lsh_detection() {
  lsh::HashConfig cfg = lsh::HashConfig::minhash_default();
  cfg.num_hashes = 256;
  cfg.lsh_bands = 32;
  cfg.lsh_rows = 8;
  std::size_t detected = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    // 180 shared + 10 + 10 private shingles: Jaccard exactly 0.9.
    const std::string tag = "s" + std::to_string(seed) + "-";
    auto a = tokens(tag + "x", 180), b = a;
    for (auto& t : tokens(tag + "a", 10)) a.push_back(t);
    for (auto& t : tokens(tag + "b", 10)) b.push_back(t);
    lsh::LshIndex index(cfg);
    index.add(lsh::minhash_signature(a, cfg, seed));
    detected += !index.query(lsh::minhash_signature(b, cfg, seed)).empty();
  }

  testkit::SynthConfig sc;
  const auto docs = testkit::synth_corpus(10000, 501, sc);
  lsh::LshIndex index(cfg);
  for (const auto& d : docs) index.add(lsh::signature(utf8::decode(d.text), cfg, 7));
  std::set<std::size_t> involved;
  for (const auto& [i, j] : index.candidate_pairs()) {
    involved.insert(i);
    involved.insert(j);
  }
  const double false_rate = static_cast<double>(involved.size()) / static_cast<double>(docs.size());
  return {detected >= 99 && false_rate < 0.05,
          fmt("planted J=0.9 pair detected in %.0f/100 seeds; %.3f%% of 10000 unrelated texts in a candidate pair",
              static_cast<double>(detected), 100 * false_rate)};
}

Outcome metric_oracles() {
  Rng rng(601);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.below(12);
    const auto p = oracle::random_labels(rng, n, 1 + rng.below(5)), g = oracle::random_labels(rng, n, 1 + rng.below(5));
    worst = std::max(worst, std::abs(metrics::adjusted_rand_index(p, g) - oracle::ari(p, g)));
    const auto v = metrics::v_measure(p, g);
    const auto w = oracle::v_measure(p, g);
    worst = std::max({worst, std::abs(v.homogeneity - w.h), std::abs(v.completeness - w.c), std::abs(v.v - w.v)});

    if (n >= 2) {
      const auto pp = metrics::same_cluster_pairs(p), gp = metrics::same_cluster_pairs(g);
      const auto m = metrics::pairwise_classification(pp, gp);
      const auto d = oracle::prf(pp, gp, true), nd = oracle::prf(pp, gp, false);
      worst = std::max({worst, std::abs(m.duplicate.precision - d.p), std::abs(m.duplicate.recall - d.r),
                        std::abs(m.duplicate.f1 - d.f), std::abs(m.non_duplicate.f1 - nd.f),
                        std::abs(m.macro_f1 - (d.f + nd.f) / 2)});
    }

    std::vector<std::vector<std::string>> ranked(n);
    std::vector<std::string> truth(n);
    for (std::size_t q = 0; q < n; ++q) {
      for (std::size_t r = 0, len = rng.below(6); r < len; ++r) ranked[q].push_back("d" + std::to_string(rng.below(8)));
      truth[q] = "d" + std::to_string(rng.below(8));
    }
    for (std::size_t k = 1; k <= 6; ++k)
      worst = std::max(worst, std::abs(metrics::recall_at_k(ranked, truth, k) - oracle::recall_at_k(ranked, truth, k)));
  }
  return {worst <= 1e-12, fmt("max deviation from brute-force oracles %.2e over 50 instances", worst)};
}

Outcome toy_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto train_corpus = testkit::synth_corpus(200, 1);
  const auto held = testkit::synth_corpus(500, 2);

  TrainConfig cfg;
  cfg.model.num_blocks = 1;
  cfg.model.hidden_dim = 64;
  cfg.model.embedding_dim = 64;
  cfg.model.attn_key_dim = 64;
  cfg.model.chunk_len = 128;
  cfg.opt.batch_size = 32;
  cfg.opt.max_lr = 0.002;
  cfg.opt.total_steps = 4000;
  cfg.seed = 0x5eed;
  cfg.log_every = 500;
  cfg.validate();
  const auto trained = train(train_corpus, cfg, augment::Resources::from_corpus(train_corpus));
  const Embedder model(trained.params);

  const auto res = augment::Resources::from_corpus(held);
  std::map<double, double> model_r1, minhash_r1, simhash_r1;
  for (double rate : {0.0, 0.1, 0.3}) {
    BenchmarkConfig bc;
    bc.per_lang = 500;
    bc.seed = 7;
    bc.max_len = 512;
    bc.sentence_rate = 0.0;
    bc.word_char_rate = rate;
    bc.word_share = 0.0;  // character-level only
    const auto records = generate_benchmark(held, bc, res);
    if (records.size() != 500) return {false, "benchmark has " + std::to_string(records.size()) + " pairs"};
    model_r1[rate] = eval_retrieval_model(records, model, MatchMode::kNearDup, {1}).recall_at_k.at(1);
    double best = 0;
    for (std::size_t n = 2; n <= 10; ++n) {
      auto hc = lsh::HashConfig::minhash_default();
      hc.ngram_size = n;
      best = std::max(best, eval_retrieval_hashes(records, hc, 7, {1}).recall_at_k.at(1));
    }
    minhash_r1[rate] = best;
    simhash_r1[rate] = eval_retrieval_hashes(records, lsh::HashConfig::simhash_default(), 7, {1}).recall_at_k.at(1);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool a = model_r1[0.0] >= 0.9 && model_r1[0.1] >= 0.9;
  const bool b = model_r1[0.3] > minhash_r1[0.3];
  const bool c = model_r1[0.0] == 1.0 && minhash_r1[0.0] == 1.0 && simhash_r1[0.0] == 1.0;
  std::string detail = "4000 steps, " + fmt("%.0f s; ", secs);
  for (double rate : {0.0, 0.1, 0.3})
    detail += fmt("char %.0f%%: model %.3f minhash %.3f simhash %.3f; ", 100 * rate, model_r1[rate], minhash_r1[rate],
                  simhash_r1[rate]);
  detail += std::string("(a) ") + (a ? "ok" : "no") + " (b) " + (b ? "ok" : "no") + " (c) " + (c ? "ok" : "no");
  return {a && b && c, detail};
}

Outcome partial_vs_near() {
  const Embedder emb(init_params(ModelConfig{}, 801));
  Rng rng(802);
  std::u32string a;
  while (a.size() < 3 * 512) a += utf8::decode(testkit::random_words(1, rng.next_u64()) + " ");
  a.resize(3 * 512);
  const std::u32string b = a.substr(512, 512);
  const auto ea = emb.embed_text(a), eb = emb.embed_text(b);
  if (ea.partials.size() != 3 || eb.partials.size() != 1) return {false, "fixture does not have 3 + 1 chunks"};
  const double partial = document_similarity(ea, eb, MatchMode::kPartialDup);
  const double near = document_similarity(ea, eb, MatchMode::kNearDup);

  const std::vector<CorpusDoc> docs{{"A", utf8::encode(a), "en", ""}, {"B", utf8::encode(b), "en", ""}};
  // An untrained model maps all text close together, so the separating
  // threshold sits between the two scores.
  const dedup::Threshold thr{dedup::ThresholdKind::kSimilarity, (partial + near) / 2};
  const auto p = dedup::dedup_corpus(dedup::represent_embeddings(docs, dedup::Method::kPartialDup, emb), thr);
  const auto n = dedup::dedup_corpus(dedup::represent_embeddings(docs, dedup::Method::kNearDup, emb), thr);
  return {partial >= 0.999 && near < partial && p.duplicates == 1 && n.duplicates == 0,
          fmt("partial %.6f, near %.6f; at similarity %.6f partial flags %.0f pair(s), near ", partial, near, thr.value,
              static_cast<double>(p.duplicates)) +
              std::to_string(n.duplicates)};
}

Outcome determinism() {
  testkit::TempDir dir;
  const auto corpus = testkit::synth_corpus(60, 901);
  const auto res = augment::Resources::from_corpus(corpus);
  std::vector<std::string> failed;
  auto check = [&](const std::string& name, const std::function<void(const std::string&, std::uint64_t)>& produce) {
    produce(dir.file(name + ".a"), 11);
    produce(dir.file(name + ".b"), 11);
    produce(dir.file(name + ".c"), 12);
    const auto a = testkit::file_checksum(dir.file(name + ".a"));
    if (a != testkit::file_checksum(dir.file(name + ".b")) || a == testkit::file_checksum(dir.file(name + ".c")))
      failed.push_back(name);
  };
  check("augment", [&](const std::string& path, std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto plan = augment::AugmentationPlan::sampled(derive_seed(seed, i));
      const auto r = augment::augment(utf8::decode(corpus[i].text), plan, res);
      out << utf8::encode(r.augmented) << '\t' << r.applied_ops.size() << '\n';
    }
  });
  check("benchmark", [&](const std::string& path, std::uint64_t seed) {
    BenchmarkConfig bc;
    bc.per_lang = 40;
    bc.seed = seed;
    write_benchmark_jsonl(path, generate_benchmark(corpus, bc, res));
  });
  check("hash", [&](const std::string& path, std::uint64_t seed) {
    for (const auto& cfg : {lsh::HashConfig::minhash_default(), lsh::HashConfig::simhash_default()}) {
      lsh::SignatureFile file{cfg, seed, {}};
      for (const auto& d : corpus) file.records.push_back({d.id, lsh::signature(utf8::decode(d.text), cfg, seed)});
      lsh::write_signatures(path + (cfg.kind == lsh::HashKind::kMinHash ? "" : ".sim"), file);
    }
    std::ofstream(path, std::ios::binary | std::ios::app) << testkit::file_bytes(path + ".sim");
  });
  check("train", [&](const std::string& path, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.model.num_blocks = 1;
    cfg.model.hidden_dim = 16;
    cfg.model.attn_key_dim = 8;
    cfg.model.embedding_dim = 16;
    cfg.model.chunk_len = 32;
    cfg.opt.batch_size = 8;
    cfg.opt.total_steps = 5;
    cfg.seed = seed;
    cfg.threads = 1;
    save_params(train(corpus, cfg, res).params, path);
  });
  std::string detail = "augment, benchmark, hashing, training: same seed same checksum, other seed differs";
  if (!failed.empty()) {
    detail = "not reproducible:";
    for (const auto& f : failed) detail += " " + f;
  }
  return {failed.empty(), detail};
}

Outcome padding_and_norm() {
  ModelConfig cfg;
  ModelConfig wide = cfg;
  wide.chunk_len = 2 * cfg.chunk_len;
  const auto p = init_params(cfg, 1001);
  ModelParams pw(wide);
  for (std::size_t i = 0; i < p.tensors().size(); ++i) pw[i].values = p[i].values;
  const GauNetwork<float> net(cfg), wide_net(wide);
  Rng rng(1002);
  double worst_pad = 0, worst_norm = 0;
  std::size_t garbage_changed = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t len = 1 + (t % 4 == 0 ? rng.below(cfg.chunk_len) : rng.below(64));
    const auto text = random_text(rng, len);
    auto m = textcodec::vectorize_chunk(text, cfg.codec());
    const auto clean = net.forward(p, m);
    for (std::size_t r = len; r < cfg.chunk_len; ++r)
      for (std::size_t c = 0; c < cfg.bits_per_char; ++c) m.at(r, c) = static_cast<std::uint8_t>(rng.below(2));
    garbage_changed += net.forward(p, m) != clean;
    const auto longer = wide_net.forward(pw, textcodec::vectorize_chunk(text, wide.codec()));
    double norm = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      worst_pad = std::max(worst_pad, static_cast<double>(std::abs(clean[i] - longer[i])));
      norm += double(clean[i]) * clean[i];
    }
    worst_norm = std::max(worst_norm, std::abs(std::sqrt(norm) - 1.0));
  }
  return {garbage_changed == 0 && worst_pad <= 1e-6 && worst_norm <= 1e-6,
          fmt("1000 cases: %.0f changed by padding content, max diff vs longer padding %.2e, max | |e| - 1 | %.2e",
              static_cast<double>(garbage_changed), worst_pad, worst_norm)};
}

Outcome benchmark_contract() {
  testkit::SynthConfig sc;
  sc.min_chars = 10;
  sc.max_chars = 12000;
  auto corpus = testkit::synth_corpus(300, 1101, sc);
  const auto res = augment::Resources::from_corpus(corpus);
  BenchmarkConfig bc;
  bc.per_lang = 300;
  bc.seed = 1102;
  const auto recs = generate_benchmark(corpus, bc, res);
  std::size_t out_of_range = 0, lo = 1 << 30, hi = 0;
  for (const auto& r : recs) {
    out_of_range += r.target_len < 16 || r.target_len > 8192 || r.target_text.size() != r.target_len;
    lo = std::min(lo, r.target_len);
    hi = std::max(hi, r.target_len);
  }
  bc.sentence_rate = 0;
  bc.word_char_rate = 0;
  std::size_t differing = 0;
  const auto zero = generate_benchmark(corpus, bc, res);
  for (const auto& r : zero) differing += r.query_text != r.target_text;
  return {!recs.empty() && out_of_range == 0 && differing == 0,
          fmt("%.0f records, target lengths %.0f..%.0f, %.0f zero-rate queries differ from targets",
              static_cast<double>(recs.size()), static_cast<double>(lo), static_cast<double>(hi),
              static_cast<double>(differing))};
}

}  // namespace

// Optional arguments pick a subset of criteria by number.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, parameter_count}, {2, gradients},       {3, loss_fixtures},   {4, minhash_fidelity},
      {5, lsh_detection},   {6, metric_oracles},  {7, toy_end_to_end},  {8, partial_vs_near},
      {9, determinism},     {10, padding_and_norm}, {11, benchmark_contract}};
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d: %s - %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
