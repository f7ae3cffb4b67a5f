#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dupsim/embedder.hpp"
#include "dupsim/error.hpp"
#include "dupsim/network.hpp"
#include "dupsim/params.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/training.hpp"
#include "dupsim/utf8.hpp"

using namespace dupsim;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.num_blocks = 1;
  c.hidden_dim = 16;
  c.attn_key_dim = 8;
  c.embedding_dim = 8;
  c.chunk_len = 16;
  return c;
}

ModelConfig small_config() {
  ModelConfig c;
  c.num_blocks = 2;
  c.hidden_dim = 24;
  c.attn_key_dim = 12;
  c.embedding_dim = 16;
  c.chunk_len = 32;
  return c;
}

std::u32string random_text(Rng& rng, std::size_t n) {
  std::u32string s;
  for (std::size_t i = 0; i < n; ++i)
    s += rng.bernoulli(0.8) ? static_cast<char32_t>(0x61 + rng.below(26)) : static_cast<char32_t>(0x400 + rng.below(200));
  return s;
}

// Perturb every parameter so that gains, offsets and biases are not at their
// initial constants.
template <class T>
void jitter(BasicParams<T>& p, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (auto& t : p.tensors())
    for (auto& v : t.values) v += static_cast<T>(rng.uniform(-scale, scale));
}

// Independent forward: runs all chunk_len rows, padding included, and masks
// padding keys out of attention and padding rows out of pooling.
std::vector<double> masked_forward(const BasicParams<double>& p, const textcodec::CharMatrix& m) {
  const auto& cfg = p.config();
  const auto& lay = p.layout();
  const std::size_t n = cfg.chunk_len, d = cfg.hidden_dim, e = cfg.expanded_dim(), s = cfg.attn_key_dim;
  const std::size_t valid = m.valid_len();
  std::vector<double> mask(n);
  for (std::size_t t = 0; t < n; ++t) mask[t] = t < valid ? 1.0 : 0.0;

  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < d; ++j) {
      double v = p[lay.input_bias].values[j];
      for (std::size_t b = 0; b < cfg.bits_per_char; ++b) v += m.at(t, b) * p[lay.input_kernel].values[b * d + j];
      const double freq = std::pow(10000.0, -double(2 * (j / 2)) / double(d));
      v += p[lay.pos_scale].values[0] * (j % 2 == 0 ? std::sin(t * freq) : std::cos(t * freq));
      x[t][j] = v;
    }

  auto swish = [](double a) { return a / (1.0 + std::exp(-a)); };
  for (const auto& bl : lay.blocks) {
    const double g = p[bl.norm_gain].values[0];
    std::vector<std::vector<double>> u(n, std::vector<double>(e)), v(n, std::vector<double>(e)),
        q(n, std::vector<double>(s)), k(n, std::vector<double>(s));
    for (std::size_t t = 0; t < n; ++t) {
      double norm = 0;
      for (double a : x[t]) norm += a * a;
      norm = std::max(std::sqrt(norm), 1e-6);
      std::vector<double> xn(d);
      for (std::size_t j = 0; j < d; ++j) xn[j] = g * x[t][j] / norm;
      for (std::size_t c = 0; c < e; ++c) {
        double a = 0, b = 0;
        for (std::size_t j = 0; j < d; ++j) {
          a += xn[j] * p[bl.w_u].values[j * e + c];
          b += xn[j] * p[bl.w_v].values[j * e + c];
        }
        u[t][c] = swish(a);
        v[t][c] = swish(b);
      }
      std::vector<double> z(s);
      for (std::size_t c = 0; c < s; ++c) {
        for (std::size_t j = 0; j < d; ++j) z[c] += xn[j] * p[bl.w_z].values[j * s + c];
        q[t][c] = p[bl.gamma_q].values[c] * z[c] + p[bl.beta_q].values[c];
        k[t][c] = p[bl.gamma_k].values[c] * z[c] + p[bl.beta_k].values[c];
      }
      const std::size_t half = s / 2;
      for (std::size_t i = 0; i < half; ++i) {
        const double ang = t * std::pow(10000.0, -double(i) / double(half));
        for (auto* r : {&q[t], &k[t]}) {
          const double a = (*r)[i], b = (*r)[i + half];
          (*r)[i] = a * std::cos(ang) - b * std::sin(ang);
          (*r)[i + half] = a * std::sin(ang) + b * std::cos(ang);
        }
      }
    }
    const double count = static_cast<double>(valid);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> h(e, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        double dotp = 0;
        for (std::size_t c = 0; c < s; ++c) dotp += q[i][c] * k[j][c];
        const double r = std::max(dotp / std::sqrt(double(s)), 0.0);
        const double w = mask[j] * r * r / count;
        for (std::size_t c = 0; c < e; ++c) h[c] += w * v[j][c];
      }
      for (std::size_t c = 0; c < e; ++c) h[c] *= u[i][c];
      for (std::size_t j = 0; j < d; ++j) {
        double o = p[bl.b_o].values[j];
        for (std::size_t c = 0; c < e; ++c) o += h[c] * p[bl.w_o].values[c * d + j];
        x[i][j] += o;
      }
    }
  }

  std::vector<double> pooled(d);
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0;
    for (std::size_t t = 0; t < n; ++t) acc += mask[t] * std::pow(std::max(x[t][j], 1e-6), cfg.gem_p);
    pooled[j] = std::pow(acc / double(valid), 1.0 / cfg.gem_p);
  }
  const std::size_t D = cfg.embedding_dim;
  std::vector<double> out(D);
  double norm = 0;
  for (std::size_t c = 0; c < D; ++c) {
    double a = p[lay.output_bias].values[c];
    for (std::size_t j = 0; j < d; ++j) a += pooled[j] * p[lay.output_kernel].values[j * D + c];
    out[c] = a;
    norm += a * a;
  }
  for (auto& a : out) a /= std::sqrt(norm);
  return out;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

TEST(Network, TruncatedForwardEqualsMaskedOracle) {
  const auto cfg = small_config();
  auto p = init_params(cfg, 21).cast<double>();
  jitter(p, 22, 0.05);
  const GauNetwork<double> net(cfg);
  Rng rng(23);
  for (std::size_t len : {1u, 2u, 7u, 31u, 32u}) {
    const auto m = textcodec::vectorize_chunk(random_text(rng, len), cfg.codec());
    const auto got = net.forward(p, m);
    const auto want = masked_forward(p, m);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12) << "len " << len;
  }
}

TEST(Network, FloatForwardTracksDouble) {
  const auto cfg = small_config();
  auto pf = init_params(cfg, 31);
  jitter(pf, 32, 0.05f);
  const auto pd = pf.cast<double>();
  const GauNetwork<float> nf(cfg);
  const GauNetwork<double> nd(cfg);
  Rng rng(33);
  const auto m = textcodec::vectorize_chunk(random_text(rng, 20), cfg.codec());
  const auto a = nf.forward(pf, m);
  const auto b = nd.forward(pd, m);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-4);
}

TEST(Network, PaddingContentIsIgnored) {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 41);
  const GauNetwork<float> net(cfg);
  Rng rng(42);
  auto m = textcodec::vectorize_chunk(random_text(rng, 10), cfg.codec());
  const auto clean = net.forward(p, m);
  for (std::size_t r = 10; r < cfg.chunk_len; ++r)
    for (std::size_t c = 0; c < cfg.bits_per_char; ++c) m.at(r, c) = static_cast<std::uint8_t>(rng.below(2));
  EXPECT_EQ(net.forward(p, m), clean);
}

TEST(Network, RejectsMismatchedShapes) {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 1);
  const GauNetwork<float> net(cfg);
  const auto wrong = textcodec::vectorize_chunk(U"abc", {cfg.chunk_len * 2, 24});
  EXPECT_THROW(net.forward(p, wrong), Error);
  const GauNetwork<float> other(tiny_config());
  EXPECT_THROW(other.forward(p, textcodec::vectorize_chunk(U"abc", tiny_config().codec())), Error);
}

TEST(Network, GemPoolMatchesDefinition) {
  const std::vector<double> x{1, 2, 3, -1, 4, 0.5};  // 3 x 2
  const auto out = gem_pool(x.data(), 3, 2, 3.0, 2);
  EXPECT_NEAR(out[0], std::cbrt((1 + 27) / 2.0), 1e-12);
  EXPECT_NEAR(out[1], std::cbrt((8 + 1e-18) / 2.0), 1e-12);
  const auto p1 = gem_pool(x.data(), 3, 2, 1.0, 3);
  EXPECT_NEAR(p1[0], (1 + 3 + 4) / 3.0, 1e-12);
}

TEST(Network, AllPoolingsAndEncodingsRun) {
  Rng rng(51);
  for (auto pool : {Pooling::kGem, Pooling::kAverage, Pooling::kMax})
    for (auto abs : {AbsPosEncoding::kScaledSin, AbsPosEncoding::kNone})
      for (auto rel : {RelPosEncoding::kRope, RelPosEncoding::kNone}) {
        auto cfg = tiny_config();
        cfg.pooling = pool;
        cfg.abs_pos_encoding = abs;
        cfg.rel_pos_encoding = rel;
        const auto p = init_params(cfg, 52);
        const auto out = GauNetwork<float>(cfg).forward(p, textcodec::vectorize_chunk(random_text(rng, 9), cfg.codec()));
        double norm = 0;
        for (float v : out) norm += double(v) * v;
        EXPECT_NEAR(norm, 1.0, 1e-5);
      }
}

// d(c . embedding)/d(params) against central differences, for every pooling.
TEST(NetworkGradient, MatchesFiniteDifferences) {
  for (auto pool : {Pooling::kGem, Pooling::kAverage, Pooling::kMax}) {
    auto cfg = tiny_config();
    cfg.pooling = pool;
    SCOPED_TRACE(to_string(pool));
    auto p = init_params(cfg, 61).cast<double>();
    jitter(p, 62, 0.05);
    const GauNetwork<double> net(cfg);
    Rng rng(63);
    const auto m = textcodec::vectorize_chunk(random_text(rng, 13), cfg.codec());
    std::vector<double> c(cfg.embedding_dim);
    for (auto& v : c) v = rng.uniform(-1, 1);
    auto objective = [&](const BasicParams<double>& q) {
      const auto emb = net.forward(q, m);
      double s = 0;
      for (std::size_t i = 0; i < emb.size(); ++i) s += c[i] * emb[i];
      return s;
    };
    ForwardCache<double> cache;
    net.forward(p, m, &cache);
    BasicParams<double> grads(cfg);
    grads.set_zero();
    net.backward(p, cache, c.data(), grads);

    std::size_t checked = 0;
    for (std::size_t ti = 0; ti < p.tensors().size(); ++ti) {
      const auto n = p[ti].size();
      for (int sample = 0; sample < 6; ++sample) {
        const std::size_t idx = rng.below(n);
        const double h = 1e-6;
        auto plus = p, minus = p;
        plus[ti].values[idx] += h;
        minus[ti].values[idx] -= h;
        const double fd = (objective(plus) - objective(minus)) / (2 * h);
        const double an = grads[ti].values[idx];
        if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
        EXPECT_LE(rel_err(an, fd), 1e-3) << p[ti].name << "[" << idx << "] analytic " << an << " fd " << fd;
        ++checked;
      }
    }
    EXPECT_GT(checked, 20u);
  }
}

TEST(NetworkGradient, BatchLossMatchesFiniteDifferences) {
  const auto cfg = tiny_config();
  auto p = init_params(cfg, 71).cast<double>();
  jitter(p, 72, 0.05);
  const GauNetwork<double> net(cfg);
  Rng rng(73);
  Batch batch;
  for (std::uint64_t cls = 0; cls < 3; ++cls)
    for (int view = 0; view < 2; ++view) {
      batch.inputs.push_back(textcodec::vectorize_chunk(random_text(rng, 5 + rng.below(11)), cfg.codec()));
      batch.class_ids.push_back(cls);
    }
  LossConfig loss;
  loss.epsilon_mining = 10.0;  // keep every pair mined so the objective is smooth
  const auto g = batch_gradient(net, p, batch, loss);
  ASSERT_GT(g.active_anchors, 0u);
  std::size_t checked = 0;
  for (std::size_t ti = 0; ti < p.tensors().size(); ++ti) {
    for (int sample = 0; sample < 3; ++sample) {
      const std::size_t idx = rng.below(p[ti].size());
      const double h = 1e-6;
      auto plus = p, minus = p;
      plus[ti].values[idx] += h;
      minus[ti].values[idx] -= h;
      const double fd =
          (batch_gradient(net, plus, batch, loss).loss - batch_gradient(net, minus, batch, loss).loss) / (2 * h);
      const double an = g.grads[ti].values[idx];
      if (std::abs(fd) < 1e-9 && std::abs(an) < 1e-9) continue;
      EXPECT_LE(rel_err(an, fd), 1e-3) << p[ti].name << "[" << idx << "]";
      ++checked;
    }
  }
  EXPECT_GT(checked, 10u);
}

TEST(NetworkGradient, ThreadedReductionIsDeterministic) {
  const auto cfg = tiny_config();
  const auto p = init_params(cfg, 81);
  const GauNetwork<float> net(cfg);
  Rng rng(82);
  Batch batch;
  for (std::uint64_t cls = 0; cls < 4; ++cls)
    for (int view = 0; view < 2; ++view) {
      batch.inputs.push_back(textcodec::vectorize_chunk(random_text(rng, 4 + rng.below(12)), cfg.codec()));
      batch.class_ids.push_back(cls);
    }
  const auto a = batch_gradient(net, p, batch, LossConfig{}, 3);
  const auto b = batch_gradient(net, p, batch, LossConfig{}, 3);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grads, b.grads);
}

TEST(Embedder, PartialAndGlobalContract) {
  auto cfg = small_config();
  const Embedder emb(init_params(cfg, 91));
  Rng rng(92);
  const auto text = random_text(rng, 70);  // 3 chunks of 32
  const auto e = emb.embed_text(text);
  ASSERT_EQ(e.partials.size(), 3u);
  EXPECT_EQ(e.partials[1], emb.embed_text(text.substr(32, 32)).partials[0]);
  EXPECT_EQ(e.global, average_embeddings(e.partials));
  for (const auto& v : e.partials) {
    double n = 0;
    for (float x : v.values) n += double(x) * x;
    EXPECT_NEAR(n, 1.0, 1e-6);
  }
  EXPECT_THROW(emb.embed_text(U""), Error);
}

TEST(Embedder, ChunkLengthIsPaddingOnly) {
  // The same weights under a longer chunk_len only add padding for short texts.
  auto short_cfg = small_config();
  auto long_cfg = short_cfg;
  long_cfg.chunk_len = 96;
  const auto ps = init_params(short_cfg, 101);
  ModelParams pl(long_cfg);
  for (std::size_t i = 0; i < ps.tensors().size(); ++i) pl[i].values = ps[i].values;
  const Embedder es(ps), el(pl);
  Rng rng(102);
  for (int t = 0; t < 20; ++t) {
    const auto text = random_text(rng, 1 + rng.below(32));
    const auto a = es.embed_text(text).global, b = el.embed_text(text).global;
    for (std::size_t i = 0; i < a.dim(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-6);
  }
}

TEST(Embedder, ThreadedEmbeddingMatchesSerial) {
  const Embedder emb(init_params(small_config(), 111));
  Rng rng(112);
  std::vector<std::u32string> texts;
  for (int i = 0; i < 9; ++i) texts.push_back(random_text(rng, 1 + rng.below(100)));
  const auto a = emb.embed_many(texts, 1), b = emb.embed_many(texts, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].global, b[i].global);
    EXPECT_EQ(a[i].partials, b[i].partials);
  }
}

TEST(Embedder, CosineOfIdenticalTextIsOne) {
  const Embedder emb(init_params(small_config(), 121));
  const auto a = emb.embed_utf8("hello world");
  EXPECT_NEAR(cosine(a.global, emb.embed_utf8("hello world").global), 1.0, 1e-6);
}
