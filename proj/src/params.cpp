#include "dupsim/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "dupsim/error.hpp"
#include "dupsim/rng.hpp"

namespace dupsim {

using nlohmann::json;

ParamLayout ParamLayout::of(const ModelConfig& cfg) {
  cfg.validate();
  ParamLayout l;
  const std::size_t d = cfg.hidden_dim;
  const std::size_t e = cfg.expanded_dim();
  const std::size_t s = cfg.attn_key_dim;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    l.specs.push_back({std::move(name), std::move(shape)});
    return l.specs.size() - 1;
  };
  l.input_kernel = add("input/kernel", {cfg.bits_per_char, d});
  l.input_bias = add("input/bias", {d});
  if (cfg.abs_pos_encoding == AbsPosEncoding::kScaledSin) l.pos_scale = add("position/scale", {1});
  for (std::size_t b = 0; b < cfg.num_blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + "/";
    BlockLayout bl{};
    bl.norm_gain = add(p + "norm_gain", {1});
    bl.w_u = add(p + "w_u", {d, e});
    bl.w_v = add(p + "w_v", {d, e});
    bl.w_z = add(p + "w_z", {d, s});
    bl.gamma_q = add(p + "gamma_q", {s});
    bl.beta_q = add(p + "beta_q", {s});
    bl.gamma_k = add(p + "gamma_k", {s});
    bl.beta_k = add(p + "beta_k", {s});
    bl.w_o = add(p + "w_o", {e, d});
    bl.b_o = add(p + "b_o", {d});
    l.blocks.push_back(bl);
  }
  l.output_kernel = add("output/kernel", {d, cfg.embedding_dim});
  l.output_bias = add("output/bias", {cfg.embedding_dim});
  return l;
}

template <class T>
BasicParams<T>::BasicParams(const ModelConfig& cfg) : config_(cfg), layout_(ParamLayout::of(cfg)) {
  tensors_.reserve(layout_.specs.size());
  for (const auto& spec : layout_.specs) tensors_.push_back({spec.name, spec.shape, std::vector<T>(spec.size(), T(0))});
}

template <class T>
const Tensor<T>* BasicParams<T>::find(const std::string& name) const noexcept {
  for (const auto& t : tensors_)
    if (t.name == name) return &t;
  return nullptr;
}

template <class T>
std::size_t BasicParams<T>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <class T>
void BasicParams<T>::set_zero() noexcept {
  for (auto& t : tensors_) std::fill(t.values.begin(), t.values.end(), T(0));
}

template class BasicParams<float>;
template class BasicParams<double>;

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p(cfg);
  const auto& l = p.layout();
  auto fill_kernel = [&](std::size_t idx) {
    auto& t = p[idx];
    Rng rng(derive_seed(seed, idx));
    const double limit = std::sqrt(3.0 / static_cast<double>(t.shape[0]));
    for (auto& v : t.values) v = static_cast<float>(rng.uniform(-limit, limit));
  };
  auto fill_const = [&](std::size_t idx, float v) { std::fill(p[idx].values.begin(), p[idx].values.end(), v); };
  fill_kernel(l.input_kernel);
  if (l.pos_scale != ParamLayout::npos) fill_const(l.pos_scale, 1.0f);
  for (const auto& b : l.blocks) {
    fill_const(b.norm_gain, 1.0f);
    fill_kernel(b.w_u);
    fill_kernel(b.w_v);
    fill_kernel(b.w_z);
    fill_const(b.gamma_q, 1.0f);
    fill_const(b.gamma_k, 1.0f);
    fill_kernel(b.w_o);
  }
  fill_kernel(l.output_kernel);
  return p;
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

constexpr char kMagic[] = "RSIMW1";
constexpr std::size_t kMagicLen = 6;

void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_f32le(std::string& out, float f) { put_u32le(out, std::bit_cast<std::uint32_t>(f)); }

json config_to_json(const ModelConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.to_kv()) j[k] = v;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  require(j.is_object(), ErrorKind::kFormat, "manifest config is not an object");
  for (const auto& [k, v] : j.items()) {
    require(v.is_string(), ErrorKind::kFormat, "manifest config value for " + k + " is not a string");
    require(cfg.apply_kv(k, v.get<std::string>()), ErrorKind::kFormat, "unknown manifest config key: " + k);
  }
  return cfg;
}

}  // namespace

void write_container(const std::string& path, const TensorContainer& c) {
  std::string blob;
  json tensors = json::array();
  for (const auto& t : c.tensors) {
    tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", blob.size()}});
    blob.reserve(blob.size() + 4 * t.size());
    for (float v : t.values) put_f32le(blob, v);
  }
  json manifest = {
      {"format_version", kWeightFormatVersion},
      {"meta", json::parse(c.meta_json.empty() ? "{}" : c.meta_json)},
      {"tensors", tensors},
      {"blob_bytes", blob.size()},
      {"blob_fnv1a64", std::to_string(fnv1a64(blob.data(), blob.size()))},
  };
  const std::string text = manifest.dump();
  std::string out(kMagic, kMagicLen);
  put_u32le(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += blob;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(f), ErrorKind::kInvalidArgument, "cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  require(static_cast<bool>(f), ErrorKind::kInvalidArgument, "write failed: " + path);
}

TensorContainer read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::kInvalidArgument, "cannot open weight file: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  require(bytes.size() >= kMagicLen + 4 && bytes.compare(0, kMagicLen, kMagic) == 0, ErrorKind::kFormat,
          "not a weight file (bad magic): " + path);
  const std::size_t manifest_len = get_u32le(raw + kMagicLen);
  const std::size_t header = kMagicLen + 4;
  require(bytes.size() >= header + manifest_len, ErrorKind::kIntegrity, "weight file truncated inside manifest");
  json manifest;
  try {
    manifest = json::parse(bytes.substr(header, manifest_len));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("corrupt weight manifest: ") + e.what());
  }
  TensorContainer c;
  std::size_t blob_bytes = 0;
  std::uint64_t expected_hash = 0;
  try {
    require(manifest.at("format_version").get<std::uint32_t>() == kWeightFormatVersion, ErrorKind::kFormat,
            "unsupported weight format version");
    c.meta_json = manifest.at("meta").dump();
    blob_bytes = manifest.at("blob_bytes").get<std::size_t>();
    expected_hash = std::stoull(manifest.at("blob_fnv1a64").get<std::string>());
    for (const auto& t : manifest.at("tensors")) {
      Tensor<float> tensor;
      tensor.name = t.at("name").get<std::string>();
      tensor.shape = t.at("shape").get<std::vector<std::size_t>>();
      const std::size_t offset = t.at("offset").get<std::size_t>();
      std::size_t n = 1;
      for (auto d : tensor.shape) n *= d;
      require(offset % 4 == 0 && offset + 4 * n <= blob_bytes, ErrorKind::kIntegrity,
              "tensor " + tensor.name + " extends past the blob");
      tensor.values.assign(n, 0.0f);
      c.tensors.push_back(std::move(tensor));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("malformed weight manifest: ") + e.what());
  } catch (const std::invalid_argument&) {
    fail(ErrorKind::kFormat, "malformed blob hash in weight manifest");
  }
  require(bytes.size() == header + manifest_len + blob_bytes, ErrorKind::kIntegrity,
          "weight blob size does not match manifest (" + std::to_string(bytes.size() - header - manifest_len) +
              " bytes present, " + std::to_string(blob_bytes) + " declared)");
  const unsigned char* blob = raw + header + manifest_len;
  require(fnv1a64(blob, blob_bytes) == expected_hash, ErrorKind::kIntegrity, "weight blob checksum mismatch");
  const auto& table = manifest.at("tensors");
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    const std::size_t offset = table[i].at("offset").get<std::size_t>();
    require(offset == expected_offset, ErrorKind::kIntegrity, "tensor offsets are not contiguous in manifest order");
    auto& t = c.tensors[i];
    for (std::size_t j = 0; j < t.values.size(); ++j)
      t.values[j] = std::bit_cast<float>(get_u32le(blob + offset + 4 * j));
    expected_offset = offset + 4 * t.values.size();
  }
  require(expected_offset == blob_bytes, ErrorKind::kIntegrity, "manifest tensors do not cover the blob exactly");
  return c;
}

void save_params(const ModelParams& params, const std::string& path) {
  TensorContainer c;
  c.meta_json = json{{"kind", "model"}, {"config", config_to_json(params.config())}}.dump();
  c.tensors = params.tensors();
  write_container(path, c);
}

ModelParams load_params(const std::string& path) {
  TensorContainer c = read_container(path);
  ModelConfig cfg;
  try {
    const json meta = json::parse(c.meta_json);
    cfg = config_from_json(meta.at("config"));
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("weight manifest has no usable config: ") + e.what());
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kIntegrity, std::string("weight manifest config invalid: ") + e.what());
  }
  ModelParams p(cfg);
  require(c.tensors.size() == p.tensors().size(), ErrorKind::kIntegrity,
          "weight file has " + std::to_string(c.tensors.size()) + " tensors, config implies " +
              std::to_string(p.tensors().size()));
  for (std::size_t i = 0; i < c.tensors.size(); ++i) {
    auto& dst = p[i];
    auto& src = c.tensors[i];
    require(src.name == dst.name, ErrorKind::kIntegrity, "tensor " + std::to_string(i) + " is '" + src.name +
                                                             "', expected '" + dst.name + "'");
    require(src.shape == dst.shape, ErrorKind::kIntegrity, "tensor " + src.name + " shape does not match config");
    for (float v : src.values) require(std::isfinite(v), ErrorKind::kIntegrity, "non-finite value in " + src.name);
    dst.values = std::move(src.values);
  }
  return p;
}

}  // namespace dupsim
