#include "dupsim/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <thread>

#include <json.hpp>

#include "dupsim/error.hpp"
#include "dupsim/rng.hpp"
#include "dupsim/utf8.hpp"

namespace dupsim {

using nlohmann::json;

void LossConfig::validate() const {
  require(alpha > 0 && beta > 0, ErrorKind::kInvalidArgument, "loss alpha and beta must be positive");
  require(lambda >= 0 && lambda <= 1, ErrorKind::kInvalidArgument, "loss lambda must be in [0, 1]");
  require(epsilon_mining >= 0, ErrorKind::kInvalidArgument, "epsilon_mining must be >= 0");
}

void OptimizerConfig::validate() const {
  require(max_lr >= 0 && end_lr >= 0, ErrorKind::kInvalidArgument, "learning rates must be >= 0");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorKind::kInvalidArgument,
          "beta1 and beta2 must be in [0, 1)");
  require(eps > 0, ErrorKind::kInvalidArgument, "eps must be positive");
  require(weight_decay >= 0, ErrorKind::kInvalidArgument, "weight_decay must be >= 0");
  require(total_steps >= 1, ErrorKind::kInvalidArgument, "total_steps must be >= 1");
  require(batch_size >= 4 && batch_size % 2 == 0, ErrorKind::kInvalidArgument,
          "batch_size must be an even number >= 4");
}

double OptimizerConfig::lr_at(std::size_t step) const {
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return end_lr + (max_lr - end_lr) * (1.0 + std::cos(std::numbers::pi * t)) / 2.0;
}

void SamplerConfig::validate() const {
  require(language_alpha > 0 && language_alpha <= 1, ErrorKind::kInvalidArgument,
          "language_alpha must be in (0, 1]");
}

void check_class_multiplicity(const std::vector<std::uint64_t>& class_ids) {
  std::map<std::uint64_t, std::size_t> counts;
  for (auto c : class_ids) ++counts[c];
  for (const auto& [c, n] : counts)
    require(n >= 2, ErrorKind::kInvalidArgument,
            "class " + std::to_string(c) + " appears once in the batch; every class needs a positive");
}

void Batch::validate() const {
  require(inputs.size() == class_ids.size(), ErrorKind::kInvalidArgument, "batch inputs and class ids differ in length");
  require(inputs.size() >= 2, ErrorKind::kInvalidArgument, "batch needs at least two examples");
  check_class_multiplicity(class_ids);
}

LossResult multi_similarity_loss(const std::vector<std::vector<double>>& emb,
                                 const std::vector<std::uint64_t>& class_ids, const LossConfig& cfg) {
  cfg.validate();
  const std::size_t n = emb.size();
  require(n >= 2, ErrorKind::kInvalidArgument, "multi-similarity loss needs at least two embeddings");
  require(class_ids.size() == n, ErrorKind::kInvalidArgument, "embeddings and class ids differ in length");
  check_class_multiplicity(class_ids);
  const std::size_t dim = emb[0].size();
  for (const auto& e : emb) require(e.size() == dim, ErrorKind::kInvalidArgument, "embedding dimensions differ");

  std::vector<double> sim(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t t = 0; t < dim; ++t) s += emb[i][t] * emb[j][t];
      sim[i * n + j] = s;
    }

  // d loss / d S_ij before averaging over active anchors.
  std::vector<double> dsim(n * n, 0.0);
  LossResult out;
  out.grad.assign(n, std::vector<double>(dim, 0.0));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double max_neg = -INFINITY, min_pos = INFINITY;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      if (class_ids[k] == class_ids[i]) min_pos = std::min(min_pos, sim[i * n + k]);
      else max_neg = std::max(max_neg, sim[i * n + k]);
    }
    if (!std::isfinite(max_neg) || !std::isfinite(min_pos)) continue;
    double sum_pos = 0, sum_neg = 0;
    bool mined = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const double s = sim[i * n + k];
      if (class_ids[k] == class_ids[i]) {
        if (s < max_neg + cfg.epsilon_mining) {
          sum_pos += std::exp(-cfg.alpha * (s - cfg.lambda));
          mined = true;
        }
      } else if (s > min_pos - cfg.epsilon_mining) {
        sum_neg += std::exp(cfg.beta * (s - cfg.lambda));
        mined = true;
      }
    }
    if (!mined) continue;
    ++out.active_anchors;
    total += std::log1p(sum_pos) / cfg.alpha + std::log1p(sum_neg) / cfg.beta;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      const double s = sim[i * n + k];
      if (class_ids[k] == class_ids[i]) {
        if (s < max_neg + cfg.epsilon_mining) dsim[i * n + k] = -std::exp(-cfg.alpha * (s - cfg.lambda)) / (1 + sum_pos);
      } else if (s > min_pos - cfg.epsilon_mining) {
        dsim[i * n + k] = std::exp(cfg.beta * (s - cfg.lambda)) / (1 + sum_neg);
      }
    }
  }
  if (out.active_anchors == 0) return out;
  const double scale = 1.0 / static_cast<double>(out.active_anchors);
  out.loss = total * scale;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double c = dsim[i * n + k] * scale;
      if (c == 0.0) continue;
      for (std::size_t t = 0; t < dim; ++t) {
        out.grad[i][t] += c * emb[k][t];
        out.grad[k][t] += c * emb[i][t];
      }
    }
  return out;
}

namespace {

template <class Fn>
void run_strided(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(0u, i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(w, i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class T>
bool all_finite(const BasicParams<T>& p, std::string& bad) {
  for (const auto& t : p.tensors())
    for (T v : t.values)
      if (!std::isfinite(v)) {
        bad = t.name;
        return false;
      }
  return true;
}

}  // namespace

template <class T>
BatchGradient<T> batch_gradient(const GauNetwork<T>& net, const BasicParams<T>& params, const Batch& batch,
                                const LossConfig& loss_cfg, unsigned threads) {
  batch.validate();
  const std::size_t n = batch.inputs.size();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<ForwardCache<T>> caches(n);
  std::vector<std::vector<double>> emb(n);
  run_strided(n, threads, [&](unsigned, std::size_t i) {
    const auto e = net.forward(params, batch.inputs[i], &caches[i]);
    emb[i].assign(e.begin(), e.end());
  });

  const LossResult lr = multi_similarity_loss(emb, batch.class_ids, loss_cfg);
  BatchGradient<T> out{lr.loss, lr.active_anchors, BasicParams<T>(params.config())};
  std::vector<BasicParams<T>> partial;
  for (unsigned w = 1; w < threads; ++w) partial.emplace_back(params.config());
  run_strided(n, threads, [&](unsigned w, std::size_t i) {
    if (std::all_of(lr.grad[i].begin(), lr.grad[i].end(), [](double g) { return g == 0.0; })) return;
    std::vector<T> d(lr.grad[i].begin(), lr.grad[i].end());
    net.backward(params, caches[i], d.data(), w == 0 ? out.grads : partial[w - 1]);
  });
  for (const auto& p : partial)
    for (std::size_t t = 0; t < p.tensors().size(); ++t)
      for (std::size_t j = 0; j < p[t].size(); ++j) out.grads[t].values[j] += p[t].values[j];
  std::string bad;
  require(all_finite(out.grads, bad), ErrorKind::kNumeric, "non-finite gradient in tensor " + bad);
  return out;
}

template BatchGradient<float> batch_gradient(const GauNetwork<float>&, const BasicParams<float>&, const Batch&,
                                             const LossConfig&, unsigned);
template BatchGradient<double> batch_gradient(const GauNetwork<double>&, const BasicParams<double>&, const Batch&,
                                              const LossConfig&, unsigned);

LambState::LambState(const ModelParams& params) {
  for (const auto& t : params.tensors()) {
    m.emplace_back(t.size(), 0.0f);
    v.emplace_back(t.size(), 0.0f);
  }
}

void lamb_update(float* w, const float* g, float* m, float* v, std::size_t n, std::size_t step, double lr,
                 const OptimizerConfig& cfg) {
  const double t = static_cast<double>(step + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  std::vector<double> r(n);
  double w_norm = 0, r_norm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double mi = cfg.beta1 * m[i] + (1 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * v[i] + (1 - cfg.beta2) * gi * gi;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    r[i] = (mi / c1) / (std::sqrt(vi / c2) + cfg.eps) + cfg.weight_decay * w[i];
    w_norm += static_cast<double>(w[i]) * w[i];
    r_norm += r[i] * r[i];
  }
  w_norm = std::sqrt(w_norm);
  r_norm = std::sqrt(r_norm);
  const double trust = (w_norm > 0 && r_norm > 0) ? w_norm / r_norm : 1.0;
  for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<float>(w[i] - lr * trust * r[i]);
}

void lamb_step(ModelParams& params, const ModelParams& grads, LambState& state, std::size_t step,
               const OptimizerConfig& cfg) {
  require(step < cfg.total_steps, ErrorKind::kScheduleExhausted,
          "step " + std::to_string(step) + " is past the schedule of " + std::to_string(cfg.total_steps) + " steps");
  require(grads.config() == params.config(), ErrorKind::kConfigMismatch, "gradients built for a different config");
  require(state.m.size() == params.tensors().size(), ErrorKind::kConfigMismatch, "optimizer state does not match params");
  const double lr = cfg.lr_at(step);
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    auto& w = params[i];
    require(state.m[i].size() == w.size() && state.v[i].size() == w.size(), ErrorKind::kConfigMismatch,
            "optimizer state does not match tensor " + w.name);
    lamb_update(w.data(), grads[i].data(), state.m[i].data(), state.v[i].data(), w.size(), step, lr, cfg);
  }
}

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  opt.validate();
  sampler.validate();
  require(log_every >= 1, ErrorKind::kInvalidArgument, "log_every must be >= 1");
  require(checkpoint_every == 0 || !checkpoint_path.empty(), ErrorKind::kInvalidArgument,
          "checkpoint_every needs checkpoint_path");
  require(threads >= 1, ErrorKind::kInvalidArgument, "threads must be >= 1");
  require(pairs.max_sentence_rate >= 0 && pairs.max_sentence_rate <= 1 && pairs.max_word_char_rate >= 0 &&
              pairs.max_word_char_rate <= 1,
          ErrorKind::kInvalidArgument, "augmentation rate bounds must be in [0, 1]");
}

kv::Map TrainConfig::to_kv() const {
  kv::Map m = model.to_kv();
  auto d = [](double v) { return kv::format_double(v); };
  m["alpha"] = d(loss.alpha);
  m["beta"] = d(loss.beta);
  m["lambda"] = d(loss.lambda);
  m["epsilon_mining"] = d(loss.epsilon_mining);
  m["max_lr"] = d(opt.max_lr);
  m["end_lr"] = d(opt.end_lr);
  m["schedule"] = "cosine";
  m["beta1"] = d(opt.beta1);
  m["beta2"] = d(opt.beta2);
  m["eps"] = d(opt.eps);
  m["weight_decay"] = d(opt.weight_decay);
  m["batch_size"] = std::to_string(opt.batch_size);
  m["total_steps"] = std::to_string(opt.total_steps);
  m["language_alpha"] = d(sampler.language_alpha);
  m["pairs_per_example"] = std::to_string(pairs.pairs_per_example);
  m["min_chars"] = std::to_string(pairs.min_chars);
  m["max_sentence_rate"] = d(pairs.max_sentence_rate);
  m["max_word_char_rate"] = d(pairs.max_word_char_rate);
  m["seed"] = std::to_string(seed);
  m["log_every"] = std::to_string(log_every);
  m["checkpoint_every"] = std::to_string(checkpoint_every);
  if (!checkpoint_path.empty()) m["checkpoint_path"] = checkpoint_path;
  m["threads"] = std::to_string(threads);
  return m;
}

TrainConfig TrainConfig::from_kv(const kv::Map& values) {
  TrainConfig c;
  for (const auto& [k, v] : values) {
    if (c.model.apply_kv(k, v)) continue;
    if (k == "alpha") c.loss.alpha = kv::parse_double(k, v);
    else if (k == "beta") c.loss.beta = kv::parse_double(k, v);
    else if (k == "lambda") c.loss.lambda = kv::parse_double(k, v);
    else if (k == "epsilon_mining") c.loss.epsilon_mining = kv::parse_double(k, v);
    else if (k == "max_lr") c.opt.max_lr = kv::parse_double(k, v);
    else if (k == "end_lr") c.opt.end_lr = kv::parse_double(k, v);
    else if (k == "schedule") require(v == "cosine", ErrorKind::kInvalidArgument, "unsupported schedule: " + v);
    else if (k == "beta1") c.opt.beta1 = kv::parse_double(k, v);
    else if (k == "beta2") c.opt.beta2 = kv::parse_double(k, v);
    else if (k == "eps") c.opt.eps = kv::parse_double(k, v);
    else if (k == "weight_decay") c.opt.weight_decay = kv::parse_double(k, v);
    else if (k == "batch_size") c.opt.batch_size = kv::parse_size(k, v);
    else if (k == "total_steps") c.opt.total_steps = kv::parse_size(k, v);
    else if (k == "language_alpha") c.sampler.language_alpha = kv::parse_double(k, v);
    else if (k == "pairs_per_example") c.pairs.pairs_per_example = kv::parse_size(k, v);
    else if (k == "min_chars") c.pairs.min_chars = kv::parse_size(k, v);
    else if (k == "max_sentence_rate") c.pairs.max_sentence_rate = kv::parse_double(k, v);
    else if (k == "max_word_char_rate") c.pairs.max_word_char_rate = kv::parse_double(k, v);
    else if (k == "seed") c.seed = kv::parse_u64(k, v);
    else if (k == "log_every") c.log_every = kv::parse_size(k, v);
    else if (k == "checkpoint_every") c.checkpoint_every = kv::parse_size(k, v);
    else if (k == "checkpoint_path") c.checkpoint_path = v;
    else if (k == "threads") c.threads = static_cast<unsigned>(kv::parse_size(k, v));
    else fail(ErrorKind::kInvalidArgument, "unknown training config key: " + k);
  }
  c.pairs.chunk_len = c.model.chunk_len;
  return c;
}

Batch make_batch(const std::vector<CorpusDoc>& corpus, const std::vector<std::u32string>& texts,
                 const TrainConfig& cfg, const augment::Resources& res, std::size_t step) {
  std::map<std::string, std::vector<std::size_t>> by_lang;
  for (std::size_t i = 0; i < texts.size(); ++i)
    if (texts[i].size() >= cfg.pairs.min_chars) by_lang[corpus[i].lang].push_back(i);
  const std::size_t classes = cfg.opt.batch_size / 2;

  std::vector<std::string> langs;
  std::vector<double> weights;
  std::vector<std::vector<std::size_t>> pools;
  for (auto& [lang, idx] : by_lang) {
    langs.push_back(lang);
    weights.push_back(std::pow(static_cast<double>(idx.size()), cfg.sampler.language_alpha));
    pools.push_back(idx);
  }

  Rng rng(derive_seed(cfg.seed, 0x6261746368ull, step));
  augment::PairConfig pc = cfg.pairs;
  pc.chunk_len = cfg.model.chunk_len;
  const auto codec = cfg.model.codec();
  Batch batch;
  for (std::size_t slot = 0; slot < classes; ++slot) {
    double total = 0;
    for (std::size_t l = 0; l < pools.size(); ++l)
      if (!pools[l].empty()) total += weights[l];
    require(total > 0, ErrorKind::kInvalidArgument, "corpus has fewer usable texts than one batch needs");
    double r = rng.uniform() * total;
    std::size_t l = 0;
    for (; l + 1 < pools.size(); ++l) {
      if (pools[l].empty()) continue;
      if (r < weights[l]) break;
      r -= weights[l];
    }
    while (pools[l].empty()) --l;
    const std::size_t pick = rng.below(pools[l].size());
    const std::size_t doc = pools[l][pick];
    pools[l].erase(pools[l].begin() + static_cast<std::ptrdiff_t>(pick));

    const std::optional<std::string> lang = corpus[doc].lang.empty() ? std::nullopt : std::optional(corpus[doc].lang);
    const auto pair = augment::make_training_pair(texts[doc], doc, pc, derive_seed(cfg.seed, step, slot), res, lang);
    batch.inputs.push_back(textcodec::vectorize_chunk(pair.anchor, codec));
    batch.inputs.push_back(textcodec::vectorize_chunk(pair.positive, codec));
    batch.class_ids.push_back(doc);
    batch.class_ids.push_back(doc);
  }
  return batch;
}

TrainResult train(const std::vector<CorpusDoc>& corpus, const TrainConfig& cfg, const augment::Resources& res,
                  const std::function<void(const TrainLogRow&)>& on_log) {
  cfg.validate();
  std::vector<std::u32string> texts;
  texts.reserve(corpus.size());
  std::size_t usable = 0;
  for (const auto& d : corpus) {
    texts.push_back(utf8::decode(d.text));
    if (texts.back().size() >= cfg.pairs.min_chars) ++usable;
  }
  require(usable >= cfg.opt.batch_size / 2, ErrorKind::kInvalidArgument,
          "corpus has " + std::to_string(usable) + " usable texts; one batch needs " +
              std::to_string(cfg.opt.batch_size / 2));

  TrainResult result{init_params(cfg.model, derive_seed(cfg.seed, 0x696e6974ull)), {}, {}};
  GauNetwork<float> net(cfg.model);
  LambState state(result.params);
  for (std::size_t step = 0; step < cfg.opt.total_steps; ++step) {
    const Batch batch = make_batch(corpus, texts, cfg, res, step);
    const auto g = batch_gradient(net, result.params, batch, cfg.loss, cfg.threads);
    const double lr = cfg.opt.lr_at(step);
    lamb_step(result.params, g.grads, state, step, cfg.opt);
    result.losses.push_back(g.loss);
    if (step % cfg.log_every == 0 || step + 1 == cfg.opt.total_steps) {
      result.log.push_back({step, lr, g.loss});
      if (on_log) on_log(result.log.back());
    }
    if (cfg.checkpoint_every && (step + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(cfg.checkpoint_path, result.params, state, step + 1);
  }
  return result;
}

void write_metrics_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::kInvalidArgument, "cannot write metrics file: " + path);
  out << "step,lr,loss\n";
  for (const auto& r : log) out << r.step << ',' << kv::format_double(r.lr) << ',' << kv::format_double(r.loss) << '\n';
}

void save_checkpoint(const std::string& path, const ModelParams& params, const LambState& state, std::size_t step) {
  save_params(params, path);
  TensorContainer c;
  c.meta_json = json{{"kind", "optimizer"}, {"step", step}}.dump();
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    const auto& t = params[i];
    c.tensors.push_back({"m/" + t.name, t.shape, state.m[i]});
    c.tensors.push_back({"v/" + t.name, t.shape, state.v[i]});
  }
  write_container(path + ".opt", c);
}

Checkpoint load_checkpoint(const std::string& path) {
  Checkpoint ck{load_params(path), {}, 0};
  const TensorContainer c = read_container(path + ".opt");
  json meta;
  try {
    meta = json::parse(c.meta_json);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("optimizer checkpoint meta: ") + e.what());
  }
  require(meta.value("kind", "") == "optimizer" && meta.contains("step"), ErrorKind::kFormat,
          "not an optimizer checkpoint: " + path + ".opt");
  ck.step = meta["step"].get<std::size_t>();
  const auto& ts = ck.params.tensors();
  require(c.tensors.size() == 2 * ts.size(), ErrorKind::kIntegrity, "optimizer checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& m = c.tensors[2 * i];
    const auto& v = c.tensors[2 * i + 1];
    require(m.name == "m/" + ts[i].name && v.name == "v/" + ts[i].name && m.size() == ts[i].size() &&
                v.size() == ts[i].size(),
            ErrorKind::kIntegrity, "optimizer checkpoint does not match weights at " + ts[i].name);
    ck.state.m.push_back(m.values);
    ck.state.v.push_back(v.values);
  }
  return ck;
}

}  // namespace dupsim
