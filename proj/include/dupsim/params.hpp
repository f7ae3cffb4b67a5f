#pragma once

// Named tensor collection for the embedding network plus the weight-file
// container ("RSIMW1" magic, JSON manifest, raw little-endian f32 blob).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dupsim/model_config.hpp"

namespace dupsim {

struct TensorSpec {
  std::string name;
  std::vector<std::size_t> shape;

  std::size_t size() const noexcept {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

// Tensor indices for one GAU block.
struct BlockLayout {
  std::size_t norm_gain, w_u, w_v, w_z, gamma_q, beta_q, gamma_k, beta_k, w_o, b_o;
};

// Order and shapes of every tensor for a config. The order is the
// serialization order.
struct ParamLayout {
  std::vector<TensorSpec> specs;
  std::size_t input_kernel = 0, input_bias = 0;
  std::size_t pos_scale = npos;
  std::vector<BlockLayout> blocks;
  std::size_t output_kernel = 0, output_bias = 0;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  static ParamLayout of(const ModelConfig& cfg);
};

template <class T>
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> values;

  T* data() noexcept { return values.data(); }
  const T* data() const noexcept { return values.data(); }
  std::size_t size() const noexcept { return values.size(); }
  bool operator==(const Tensor&) const = default;
};

template <class T>
class BasicParams {
 public:
  // Zero-filled tensors with the layout of cfg.
  explicit BasicParams(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }

  std::vector<Tensor<T>>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor<T>>& tensors() const noexcept { return tensors_; }
  Tensor<T>& operator[](std::size_t i) noexcept { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const noexcept { return tensors_[i]; }

  const Tensor<T>* find(const std::string& name) const noexcept;
  std::size_t parameter_count() const noexcept;
  void set_zero() noexcept;

  template <class U>
  BasicParams<U> cast() const {
    BasicParams<U> out(config_);
    for (std::size_t i = 0; i < tensors_.size(); ++i)
      for (std::size_t j = 0; j < tensors_[i].size(); ++j)
        out[i].values[j] = static_cast<U>(tensors_[i].values[j]);
    return out;
  }

  bool operator==(const BasicParams& o) const { return config_ == o.config_ && tensors_ == o.tensors_; }

 private:
  ModelConfig config_;
  ParamLayout layout_;
  std::vector<Tensor<T>> tensors_;
};

using ModelParams = BasicParams<float>;

extern template class BasicParams<float>;
extern template class BasicParams<double>;

// Kernels: uniform(+-sqrt(3 / fan_in)). Gains, gamma and the positional
// scale start at 1; biases and beta at 0.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

inline constexpr std::uint32_t kWeightFormatVersion = 1;

void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

// Generic container writer/reader shared with optimizer checkpoints. The
// manifest carries `meta` verbatim (JSON text) alongside the tensor table.
struct TensorContainer {
  std::string meta_json;
  std::vector<Tensor<float>> tensors;
};
void write_container(const std::string& path, const TensorContainer& c);
TensorContainer read_container(const std::string& path);

// 64-bit FNV-1a over raw bytes; used for blob integrity and index checksums.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) noexcept;

}  // namespace dupsim
