#pragma once

// Metric-learning trainer: multi-similarity loss with pair mining, reverse
// mode through the embedding network, and LAMB with cosine decay.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dupsim/augment.hpp"
#include "dupsim/corpus.hpp"
#include "dupsim/kvconfig.hpp"
#include "dupsim/model_config.hpp"
#include "dupsim/network.hpp"
#include "dupsim/params.hpp"
#include "dupsim/textcodec.hpp"

namespace dupsim {

struct LossConfig {
  double alpha = 4.0;
  double beta = 40.0;
  double lambda = 0.5;
  double epsilon_mining = 0.1;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

enum class LrSchedule { kCosine };

struct OptimizerConfig {
  double max_lr = 1e-3;
  double end_lr = 0.0;
  LrSchedule schedule = LrSchedule::kCosine;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.0;
  std::size_t batch_size = 32;
  std::size_t total_steps = 2000;

  void validate() const;
  // Cosine decay from max_lr at step 0 to end_lr at total_steps.
  double lr_at(std::size_t step) const;
  bool operator==(const OptimizerConfig&) const = default;
};

struct SamplerConfig {
  double language_alpha = 0.3;

  void validate() const;
  bool operator==(const SamplerConfig&) const = default;
};

struct Batch {
  std::vector<textcodec::CharMatrix> inputs;
  std::vector<std::uint64_t> class_ids;

  // Same lengths, and every class present at least twice.
  void validate() const;
};

// Throws invalid-argument unless every id occurs at least twice.
void check_class_multiplicity(const std::vector<std::uint64_t>& class_ids);

struct LossResult {
  double loss = 0.0;
  std::vector<std::vector<double>> grad;  // d loss / d embedding, per example
  std::size_t active_anchors = 0;         // anchors with at least one mined pair
};

LossResult multi_similarity_loss(const std::vector<std::vector<double>>& embeddings,
                                 const std::vector<std::uint64_t>& class_ids, const LossConfig& cfg);

template <class T>
struct BatchGradient {
  double loss = 0.0;
  std::size_t active_anchors = 0;
  BasicParams<T> grads;
};

// Forward every example, evaluate the loss and accumulate parameter
// gradients. Per-worker buffers are reduced in worker order, so results are
// reproducible for a fixed thread count.
template <class T>
BatchGradient<T> batch_gradient(const GauNetwork<T>& net, const BasicParams<T>& params, const Batch& batch,
                                const LossConfig& loss_cfg, unsigned threads = 1);

struct LambState {
  std::vector<std::vector<float>> m, v;

  LambState() = default;
  explicit LambState(const ModelParams& params);
};

// One LAMB update of a single tensor.
void lamb_update(float* w, const float* g, float* m, float* v, std::size_t n, std::size_t step, double lr,
                 const OptimizerConfig& cfg);
// LAMB over every tensor; throws schedule-exhausted when step >= total_steps.
void lamb_step(ModelParams& params, const ModelParams& grads, LambState& state, std::size_t step,
               const OptimizerConfig& cfg);

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  OptimizerConfig opt;
  SamplerConfig sampler;
  augment::PairConfig pairs;
  std::uint64_t seed = 0;
  std::size_t log_every = 10;
  std::size_t checkpoint_every = 0;  // 0 disables checkpoints
  std::string checkpoint_path;
  unsigned threads = 1;

  void validate() const;
  // Flat key=value form; keys are the field names of the nested configs.
  kv::Map to_kv() const;
  static TrainConfig from_kv(const kv::Map& values);
};

struct TrainLogRow {
  std::size_t step;
  double lr;
  double loss;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainLogRow> log;  // every log_every steps, plus the final step
  std::vector<double> losses;    // every step
};

// Per step: batch_size / 2 distinct texts drawn with language weights
// count^language_alpha, each contributing an independently augmented pair.
TrainResult train(const std::vector<CorpusDoc>& corpus, const TrainConfig& cfg, const augment::Resources& res,
                  const std::function<void(const TrainLogRow&)>& on_log = {});

Batch make_batch(const std::vector<CorpusDoc>& corpus, const std::vector<std::u32string>& texts,
                 const TrainConfig& cfg, const augment::Resources& res, std::size_t step);

void write_metrics_csv(const std::string& path, const std::vector<TrainLogRow>& log);

// Weights go to `path`, optimizer moments to `path + ".opt"`.
void save_checkpoint(const std::string& path, const ModelParams& params, const LambState& state, std::size_t step);
struct Checkpoint {
  ModelParams params;
  LambState state;
  std::size_t step;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dupsim
