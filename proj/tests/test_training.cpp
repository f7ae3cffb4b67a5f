#include <gtest/gtest.h>

#include <cstdlib>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dupsim/error.hpp"
#include "dupsim/augment.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/training.hpp"
#include "dupsim/utf8.hpp"
#include "synth.hpp"

using namespace dupsim;

namespace {

// Unit vectors whose Gram matrix is g (row-major n x n), by Cholesky.
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

// Direct evaluation of the loss definition.
double ms_loss_oracle(const std::vector<std::vector<double>>& e, const std::vector<std::uint64_t>& cls,
                      const LossConfig& c) {
  const std::size_t n = e.size();
  auto S = [&](std::size_t i, std::size_t j) { return std::inner_product(e[i].begin(), e[i].end(), e[j].begin(), 0.0); };
  double total = 0;
  std::size_t active = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pos, neg;
    for (std::size_t k = 0; k < n; ++k)
      if (k != i) (cls[k] == cls[i] ? pos : neg).push_back(S(i, k));
    if (pos.empty() || neg.empty()) continue;
    const double hardest_neg = *std::max_element(neg.begin(), neg.end());
    const double hardest_pos = *std::min_element(pos.begin(), pos.end());
    double sp = 0, sn = 0;
    bool any = false;
    for (double s : pos)
      if (s < hardest_neg + c.epsilon_mining) sp += std::exp(-c.alpha * (s - c.lambda)), any = true;
    for (double s : neg)
      if (s > hardest_pos - c.epsilon_mining) sn += std::exp(c.beta * (s - c.lambda)), any = true;
    if (!any) continue;
    total += std::log(1 + sp) / c.alpha + std::log(1 + sn) / c.beta;
    ++active;
  }
  return active ? total / active : 0.0;
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.num_blocks = 1;
  c.hidden_dim = 16;
  c.attn_key_dim = 8;
  c.embedding_dim = 16;
  c.chunk_len = 32;
  return c;
}

TrainConfig tiny_train(std::size_t steps) {
  TrainConfig c;
  c.model = tiny_model();
  c.opt.batch_size = 8;
  c.opt.total_steps = steps;
  c.opt.max_lr = 0.003;
  c.pairs.chunk_len = 32;
  c.seed = 99;
  c.log_every = 5;
  return c;
}

}  // namespace

TEST(MultiSimilarityLoss, SeparatedBatchIsZero) {
  // Two classes on orthogonal axes: positives at 1, negatives at 0.
  const std::vector<std::vector<double>> e{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
  const auto r = multi_similarity_loss(e, {0, 0, 1, 1}, LossConfig{});
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.active_anchors, 0u);
  for (const auto& g : r.grad)
    for (double x : g) EXPECT_EQ(x, 0.0);
  LossConfig b20;
  b20.beta = 20;
  EXPECT_EQ(multi_similarity_loss(e, {0, 0, 1, 1}, b20).loss, 0.0);
}

TEST(MultiSimilarityLoss, HalfPositiveSixTenthsNegative) {
  // Each anchor: one positive at 0.5, one negative at 0.6, one negative at 0.2
  // which mining drops (0.2 <= 0.5 - 0.1).
  const std::vector<double> gram{1, .5, .6, .2, .5, 1, .2, .6, .6, .2, 1, .5, .2, .6, .5, 1};
  const auto e = from_gram(gram, 4);
  const auto r = multi_similarity_loss(e, {0, 0, 1, 1}, LossConfig{});
  const double expected = 0.25 * std::log(2.0) + 0.025 * std::log(1 + std::exp(4.0));
  EXPECT_NEAR(r.loss, expected, 1e-12);
  EXPECT_NEAR(r.loss, 0.2737, 1e-4);
  EXPECT_EQ(r.active_anchors, 4u);
}

TEST(MultiSimilarityLoss, MatchesDirectEvaluation) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t classes = 2 + rng.below(4);
    std::vector<std::uint64_t> cls;
    for (std::uint64_t c = 0; c < classes; ++c)
      for (std::size_t k = 0, m = 2 + rng.below(2); k < m; ++k) cls.push_back(c);
    const auto e = random_unit(rng, cls.size(), 8);
    LossConfig c;
    c.epsilon_mining = rng.uniform(0, 0.5);
    EXPECT_NEAR(multi_similarity_loss(e, cls, c).loss, ms_loss_oracle(e, cls, c), 1e-12);
  }
}

TEST(MultiSimilarityLoss, GradientMatchesFiniteDifferences) {
  Rng rng(7);
  for (int batch = 0; batch < 20; ++batch) {
    const std::vector<std::uint64_t> cls{0, 0, 1, 1, 2, 2, 3, 3};
    // Correlated embeddings so that most pairs fall inside the mining margin.
    auto e = random_unit(rng, 8, 16);
    for (std::size_t i = 1; i < 8; i += 2)
      for (std::size_t t = 0; t < 16; ++t) e[i][t] = 0.7 * e[i - 1][t] + 0.3 * e[i][t];
    const LossConfig c;
    const auto r = multi_similarity_loss(e, cls, c);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t t = 0; t < 16; ++t) {
        const double h = 1e-6;
        auto p = e, m = e;
        p[i][t] += h;
        m[i][t] -= h;
        const double fd = (multi_similarity_loss(p, cls, c).loss - multi_similarity_loss(m, cls, c).loss) / (2 * h);
        const double an = r.grad[i][t];
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
        EXPECT_LE(rel, 1e-4) << "batch " << batch << " e[" << i << "][" << t << "] " << an << " vs " << fd;
      }
  }
}

TEST(MultiSimilarityLoss, PermutationInvariant) {
  Rng rng(9);
  std::vector<std::uint64_t> cls{0, 0, 1, 1, 2, 2};
  auto e = random_unit(rng, 6, 4);
  const double before = multi_similarity_loss(e, cls, LossConfig{}).loss;
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  std::vector<std::vector<double>> e2;
  std::vector<std::uint64_t> c2;
  for (auto i : perm) {
    e2.push_back(e[i]);
    c2.push_back(cls[i]);
  }
  EXPECT_NEAR(multi_similarity_loss(e2, c2, LossConfig{}).loss, before, 1e-14);
}

TEST(MultiSimilarityLoss, RejectsSingletonClass) {
  const std::vector<std::vector<double>> e{{1, 0}, {1, 0}, {0, 1}};
  EXPECT_THROW(multi_similarity_loss(e, {0, 0, 1}, LossConfig{}), Error);
  EXPECT_THROW(check_class_multiplicity({1, 2, 2}), Error);
  EXPECT_NO_THROW(check_class_multiplicity({1, 1, 2, 2, 2}));
}

TEST(Lamb, ScheduleEndpoints) {
  OptimizerConfig c;
  c.max_lr = 1e-3;
  c.end_lr = 1e-5;
  c.total_steps = 100;
  EXPECT_DOUBLE_EQ(c.lr_at(0), 1e-3);
  EXPECT_NEAR(c.lr_at(50), (1e-3 + 1e-5) / 2, 1e-15);
  EXPECT_NEAR(c.lr_at(99), 1e-5, 3e-7);
  EXPECT_NEAR(c.lr_at(100), 1e-5, 1e-15);
}

TEST(Lamb, SingleScalarHandEvaluation) {
  OptimizerConfig c;
  float w = 1, g = 1, m = 0, v = 0;
  lamb_update(&w, &g, &m, &v, 1, 0, c.lr_at(0), c);
  EXPECT_NEAR(w, 0.999f, 1e-7);
  EXPECT_NEAR(m, 0.1f, 1e-7);
  EXPECT_NEAR(v, 0.001f, 1e-9);
}

TEST(Lamb, MatchesReferenceUpdate) {
  Rng rng(11);
  OptimizerConfig c;
  c.weight_decay = 0.01;
  const std::size_t n = 37;
  std::vector<float> w(n), m(n), v(n);
  std::vector<double> wd(n), md(n), vd(n);
  for (std::size_t i = 0; i < n; ++i) wd[i] = w[i] = static_cast<float>(rng.uniform(-1, 1));
  for (std::size_t step = 0; step < 5; ++step) {
    std::vector<float> g(n);
    for (auto& x : g) x = static_cast<float>(rng.uniform(-1, 1));
    const double lr = 0.01;
    lamb_update(w.data(), g.data(), m.data(), v.data(), n, step, lr, c);
    std::vector<double> r(n);
    double wn = 0, rn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      md[i] = c.beta1 * md[i] + (1 - c.beta1) * g[i];
      vd[i] = c.beta2 * vd[i] + (1 - c.beta2) * double(g[i]) * g[i];
      const double mh = md[i] / (1 - std::pow(c.beta1, step + 1.0));
      const double vh = vd[i] / (1 - std::pow(c.beta2, step + 1.0));
      r[i] = mh / (std::sqrt(vh) + c.eps) + c.weight_decay * wd[i];
      wn += wd[i] * wd[i];
      rn += r[i] * r[i];
    }
    const double tau = std::sqrt(wn) / std::sqrt(rn);
    for (std::size_t i = 0; i < n; ++i) wd[i] -= lr * tau * r[i];
    for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(w[i], wd[i], 1e-5) << "step " << step;
  }
}

TEST(Lamb, ZeroGradientIsFixedPoint) {
  const auto p0 = init_params(tiny_model(), 3);
  auto p = p0;
  ModelParams zero(tiny_model());
  zero.set_zero();
  LambState s(p);
  OptimizerConfig c;
  c.total_steps = 10;
  for (std::size_t step = 0; step < 10; ++step) lamb_step(p, zero, s, step, c);
  EXPECT_EQ(p, p0);
}

TEST(Lamb, StepPastScheduleFails) {
  auto p = init_params(tiny_model(), 3);
  ModelParams zero(tiny_model());
  zero.set_zero();
  LambState s(p);
  OptimizerConfig c;
  c.total_steps = 4;
  try {
    lamb_step(p, zero, s, 4, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kScheduleExhausted);
  }
}

TEST(TrainConfig, KvRoundTrip) {
  auto c = tiny_train(17);
  c.loss.beta = 20;
  c.sampler.language_alpha = 0.5;
  c.pairs.max_word_char_rate = 0.2;
  const auto back = TrainConfig::from_kv(c.to_kv());
  EXPECT_EQ(back.to_kv(), c.to_kv());
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.opt, c.opt);
  EXPECT_EQ(back.loss, c.loss);
  auto kv = c.to_kv();
  kv["typo_key"] = "1";
  EXPECT_THROW(TrainConfig::from_kv(kv), Error);
  kv = c.to_kv();
  kv["batch_size"] = "7";
  EXPECT_THROW(TrainConfig::from_kv(kv).validate(), Error);
}

TEST(Training, BatchHasTwoViewsPerClass) {
  const auto corpus = testkit::synth_corpus(20, 1);
  std::vector<std::u32string> texts;
  for (const auto& d : corpus) texts.push_back(utf8::decode(d.text));
  const auto res = augment::Resources::from_corpus(corpus);
  const auto cfg = tiny_train(5);
  const auto b = make_batch(corpus, texts, cfg, res, 0);
  ASSERT_EQ(b.inputs.size(), 8u);
  EXPECT_NO_THROW(b.validate());
  std::map<std::uint64_t, int> counts;
  for (auto c : b.class_ids) ++counts[c];
  EXPECT_EQ(counts.size(), 4u);
  for (const auto& [c, n] : counts) EXPECT_EQ(n, 2);
  const auto again = make_batch(corpus, texts, cfg, res, 0);
  EXPECT_EQ(again.inputs, b.inputs);
  EXPECT_EQ(again.class_ids, b.class_ids);
}

TEST(Training, DeterministicAndLearns) {
  const auto corpus = testkit::synth_corpus(40, 2);
  const auto res = augment::Resources::from_corpus(corpus);
  const auto cfg = tiny_train(120);
  const auto a = train(corpus, cfg, res);
  const auto b = train(corpus, cfg, res);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.losses, b.losses);
  ASSERT_EQ(a.losses.size(), 120u);
  const double first = std::accumulate(a.losses.begin(), a.losses.begin() + 20, 0.0) / 20;
  const double last = std::accumulate(a.losses.end() - 20, a.losses.end(), 0.0) / 20;
  EXPECT_LT(last, first);
  EXPECT_EQ(a.log.front().step, 0u);
  EXPECT_EQ(a.log.back().step, 119u);
}

TEST(Training, TooSmallCorpusFails) {
  const auto corpus = testkit::synth_corpus(3, 3);
  const auto res = augment::Resources::from_corpus(corpus);
  EXPECT_THROW(train(corpus, tiny_train(2), res), Error);
}

TEST(Training, CheckpointRoundTrip) {
  testkit::TempDir dir;
  auto p = init_params(tiny_model(), 4);
  LambState s(p);
  Rng rng(5);
  for (auto& t : s.m)
    for (auto& x : t) x = static_cast<float>(rng.uniform(-1, 1));
  for (auto& t : s.v)
    for (auto& x : t) x = static_cast<float>(rng.uniform(0, 1));
  save_checkpoint(dir.file("ck"), p, s, 42);
  const auto back = load_checkpoint(dir.file("ck"));
  EXPECT_EQ(back.step, 42u);
  EXPECT_EQ(back.params, p);
  EXPECT_EQ(back.state.m, s.m);
  EXPECT_EQ(back.state.v, s.v);
}

TEST(Training, MetricsCsv) {
  testkit::TempDir dir;
  write_metrics_csv(dir.file("m.csv"), {{0, 0.001, 1.5}, {10, 0.0005, 0.25}});
  const auto text = testkit::file_bytes(dir.file("m.csv"));
  EXPECT_EQ(text.substr(0, 13), "step,lr,loss\n");
  const auto row = text.substr(text.rfind(',', text.rfind(',') - 1) - 2);
  EXPECT_EQ(row.substr(0, 3), "10,");
  char* end = nullptr;
  EXPECT_EQ(std::strtod(row.c_str() + 3, &end), 0.0005);
  EXPECT_EQ(std::strtod(end + 1, nullptr), 0.25);
}
