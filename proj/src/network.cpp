#include "dupsim/network.hpp"

#include <algorithm>
#include <cmath>

#include "dupsim/error.hpp"
#include "dupsim/kernels.hpp"

namespace dupsim {

namespace k = kernels;

template <class T>
std::vector<T> gem_pool(const T* x, std::size_t n, std::size_t d, double p, std::size_t valid_len) {
  require(valid_len >= 1 && valid_len <= n, ErrorKind::kInvalidArgument, "gem_pool: valid_len must be in [1, n]");
  require(p >= 1.0, ErrorKind::kInvalidArgument, "gem_pool: p must be >= 1");
  std::vector<double> acc(d, 0.0);
  for (std::size_t i = 0; i < valid_len; ++i)
    for (std::size_t j = 0; j < d; ++j)
      acc[j] += std::pow(std::max(static_cast<double>(x[i * d + j]), kGemFloor), p);
  std::vector<T> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = static_cast<T>(std::pow(acc[j] / static_cast<double>(valid_len), 1.0 / p));
  return out;
}

template std::vector<float> gem_pool(const float*, std::size_t, std::size_t, double, std::size_t);
template std::vector<double> gem_pool(const double*, std::size_t, std::size_t, double, std::size_t);

namespace {

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
void rotate(T* rows, std::size_t len, std::size_t s, const std::vector<T>& cos_t, const std::vector<T>& sin_t,
            bool inverse) {
  const std::size_t half = s / 2;
  for (std::size_t t = 0; t < len; ++t) {
    T* r = rows + t * s;
    const T* c = cos_t.data() + t * half;
    const T* sn = sin_t.data() + t * half;
    for (std::size_t i = 0; i < half; ++i) {
      const T a = r[i];
      const T b = r[i + half];
      const T si = inverse ? -sn[i] : sn[i];
      r[i] = a * c[i] - b * si;
      r[i + half] = a * si + b * c[i];
    }
  }
}

template <class T>
bool all_finite(const std::vector<T>& v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

}  // namespace

template <class T>
GauNetwork<T>::GauNetwork(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t n = cfg_.chunk_len;
  const std::size_t d = cfg_.hidden_dim;
  if (cfg_.abs_pos_encoding == AbsPosEncoding::kScaledSin) {
    pos_table_.resize(n * d);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t j = 0; j < d; ++j) {
        const double freq = std::pow(10000.0, -static_cast<double>(2 * (j / 2)) / static_cast<double>(d));
        const double a = static_cast<double>(t) * freq;
        pos_table_[t * d + j] = static_cast<T>(j % 2 == 0 ? std::sin(a) : std::cos(a));
      }
  }
  if (cfg_.rel_pos_encoding == RelPosEncoding::kRope) {
    const std::size_t half = cfg_.attn_key_dim / 2;
    rope_cos_.resize(n * half);
    rope_sin_.resize(n * half);
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t i = 0; i < half; ++i) {
        const double theta = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
        rope_cos_[t * half + i] = static_cast<T>(std::cos(static_cast<double>(t) * theta));
        rope_sin_[t * half + i] = static_cast<T>(std::sin(static_cast<double>(t) * theta));
      }
  }
}

template <class T>
void GauNetwork<T>::check_params(const BasicParams<T>& params) const {
  require(params.config() == cfg_, ErrorKind::kConfigMismatch, "parameters were built for a different model config");
}

template <class T>
std::vector<T> GauNetwork<T>::forward(const BasicParams<T>& params, const textcodec::CharMatrix& m,
                                      ForwardCache<T>* cache) const {
  check_params(params);
  require(m.rows() == cfg_.chunk_len && m.cols() == cfg_.bits_per_char, ErrorKind::kConfigMismatch,
          "char matrix shape does not match model config");
  const std::size_t len = m.valid_len();
  require(len >= 1 && len <= m.rows(), ErrorKind::kInvalidArgument, "char matrix has no valid rows");

  const auto& lay = params.layout();
  const std::size_t d = cfg_.hidden_dim;
  const std::size_t e = cfg_.expanded_dim();
  const std::size_t s = cfg_.attn_key_dim;
  const std::size_t bits = cfg_.bits_per_char;

  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.len = len;
  c.codepoint_bits.assign(len, 0);
  for (std::size_t t = 0; t < len; ++t) {
    std::uint32_t packed = 0;
    const auto* row = m.row(t);
    for (std::size_t b = 0; b < bits; ++b) packed |= static_cast<std::uint32_t>(row[b] & 1u) << b;
    c.codepoint_bits[t] = packed;
  }

  // Input projection and absolute positions.
  std::vector<T> x(len * d);
  const T* w_in = params[lay.input_kernel].data();
  const T* b_in = params[lay.input_bias].data();
  const T pos_scale = lay.pos_scale != ParamLayout::npos ? params[lay.pos_scale].values[0] : T(0);
  for (std::size_t t = 0; t < len; ++t) {
    T* xr = x.data() + t * d;
    std::copy(b_in, b_in + d, xr);
    for (std::size_t b = 0; b < bits; ++b)
      if ((c.codepoint_bits[t] >> b) & 1u) k::axpy(T(1), w_in + b * d, xr, d);
    if (!pos_table_.empty()) k::axpy(pos_scale, pos_table_.data() + t * d, xr, d);
  }

  const T inv_sqrt_s = T(1) / std::sqrt(static_cast<T>(s));
  const T inv_len = T(1) / static_cast<T>(len);
  c.blocks.resize(cfg_.num_blocks);
  std::vector<T> scores(len * len);
  std::vector<T> h(len * e);
  for (std::size_t bi = 0; bi < cfg_.num_blocks; ++bi) {
    const auto& bl = lay.blocks[bi];
    auto& bc = c.blocks[bi];
    bc.x_in = x;

    // ScaleNorm.
    const T gain = params[bl.norm_gain].values[0];
    bc.normed.resize(len * d);
    bc.row_norm.resize(len);
    for (std::size_t t = 0; t < len; ++t) {
      const T* xr = x.data() + t * d;
      const T r = std::max(std::sqrt(k::dot(xr, xr, d)), static_cast<T>(kNormEps));
      bc.row_norm[t] = r;
      T* nr = bc.normed.data() + t * d;
      for (std::size_t j = 0; j < d; ++j) nr[j] = gain * xr[j] / r;
    }

    // Gated projections.
    bc.pre_u.resize(len * e);
    bc.pre_v.resize(len * e);
    bc.z.resize(len * s);
    k::gemm_nn(len, e, d, bc.normed.data(), params[bl.w_u].data(), bc.pre_u.data());
    k::gemm_nn(len, e, d, bc.normed.data(), params[bl.w_v].data(), bc.pre_v.data());
    k::gemm_nn(len, s, d, bc.normed.data(), params[bl.w_z].data(), bc.z.data());
    bc.u.resize(len * e);
    bc.v.resize(len * e);
    for (std::size_t i = 0; i < len * e; ++i) {
      bc.u[i] = bc.pre_u[i] * sigmoid(bc.pre_u[i]);
      bc.v[i] = bc.pre_v[i] * sigmoid(bc.pre_v[i]);
    }

    // Per-dim scale/offset into query and key, then rotary positions.
    bc.q.resize(len * s);
    bc.k.resize(len * s);
    const T* gq = params[bl.gamma_q].data();
    const T* bq = params[bl.beta_q].data();
    const T* gk = params[bl.gamma_k].data();
    const T* bk = params[bl.beta_k].data();
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t j = 0; j < s; ++j) {
        const T zv = bc.z[t * s + j];
        bc.q[t * s + j] = gq[j] * zv + bq[j];
        bc.k[t * s + j] = gk[j] * zv + bk[j];
      }
    if (!rope_cos_.empty()) {
      rotate(bc.q.data(), len, s, rope_cos_, rope_sin_, false);
      rotate(bc.k.data(), len, s, rope_cos_, rope_sin_, false);
    }

    // Squared-ReLU attention normalised by the number of valid positions.
    k::gemm_nt(len, len, s, bc.q.data(), bc.k.data(), scores.data());
    bc.relu_s.resize(len * len);
    for (std::size_t i = 0; i < len * len; ++i) {
      const T sv = scores[i] * inv_sqrt_s;
      bc.relu_s[i] = sv > T(0) ? sv : T(0);
      scores[i] = bc.relu_s[i] * bc.relu_s[i] * inv_len;
    }
    bc.av.resize(len * e);
    k::gemm_nn(len, e, len, scores.data(), bc.v.data(), bc.av.data());
    for (std::size_t i = 0; i < len * e; ++i) h[i] = bc.u[i] * bc.av[i];

    // Output projection and residual.
    const T* b_o = params[bl.b_o].data();
    k::gemm_nn(len, d, e, h.data(), params[bl.w_o].data(), x.data(), true);
    for (std::size_t t = 0; t < len; ++t) k::axpy(T(1), b_o, x.data() + t * d, d);
  }
  c.x_out = x;

  // Pooling over valid positions.
  switch (cfg_.pooling) {
    case Pooling::kGem:
      c.pooled = gem_pool(x.data(), len, d, cfg_.gem_p, len);
      break;
    case Pooling::kAverage:
      c.pooled.assign(d, T(0));
      for (std::size_t t = 0; t < len; ++t) k::axpy(inv_len, x.data() + t * d, c.pooled.data(), d);
      break;
    case Pooling::kMax:
      c.pooled.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(d));
      c.argmax.assign(d, 0);
      for (std::size_t t = 1; t < len; ++t)
        for (std::size_t j = 0; j < d; ++j)
          if (x[t * d + j] > c.pooled[j]) {
            c.pooled[j] = x[t * d + j];
            c.argmax[j] = static_cast<std::uint32_t>(t);
          }
      break;
  }

  // Dense projection and L2 normalization.
  const std::size_t out_dim = cfg_.embedding_dim;
  c.projected.assign(params[lay.output_bias].values.begin(), params[lay.output_bias].values.end());
  k::gemm_nn(1, out_dim, d, c.pooled.data(), params[lay.output_kernel].data(), c.projected.data(), true);
  const T norm = std::sqrt(k::dot(c.projected.data(), c.projected.data(), out_dim));
  require(std::isfinite(norm) && norm > T(0), ErrorKind::kNumeric, "embedding projection is zero or non-finite");
  c.projected_norm = norm;
  c.embedding.resize(out_dim);
  for (std::size_t j = 0; j < out_dim; ++j) c.embedding[j] = c.projected[j] / norm;
  require(all_finite(c.embedding), ErrorKind::kNumeric, "non-finite embedding");
  return c.embedding;
}

template <class T>
void GauNetwork<T>::backward(const BasicParams<T>& params, const ForwardCache<T>& c, const T* d_embedding,
                             BasicParams<T>& grads) const {
  check_params(params);
  require(grads.config() == cfg_, ErrorKind::kConfigMismatch, "gradient buffer built for a different config");
  const auto& lay = params.layout();
  const std::size_t len = c.len;
  const std::size_t d = cfg_.hidden_dim;
  const std::size_t e = cfg_.expanded_dim();
  const std::size_t s = cfg_.attn_key_dim;
  const std::size_t out_dim = cfg_.embedding_dim;

  // Through L2 normalization: project onto the tangent space.
  std::vector<T> dy(out_dim);
  const T proj = k::dot(c.embedding.data(), d_embedding, out_dim);
  for (std::size_t j = 0; j < out_dim; ++j) dy[j] = (d_embedding[j] - c.embedding[j] * proj) / c.projected_norm;

  // Output projection.
  k::gemm_tn_acc(d, out_dim, 1, c.pooled.data(), dy.data(), grads[lay.output_kernel].data());
  k::axpy(T(1), dy.data(), grads[lay.output_bias].data(), out_dim);
  std::vector<T> dpooled(d);
  k::gemm_nt(1, d, out_dim, dy.data(), params[lay.output_kernel].data(), dpooled.data());

  // Pooling.
  std::vector<T> dx(len * d, T(0));
  const T inv_len = T(1) / static_cast<T>(len);
  switch (cfg_.pooling) {
    case Pooling::kGem: {
      const T p = static_cast<T>(cfg_.gem_p);
      const T floor = static_cast<T>(kGemFloor);
      for (std::size_t j = 0; j < d; ++j) {
        const T scale = dpooled[j] * std::pow(c.pooled[j], T(1) - p) * inv_len;
        for (std::size_t t = 0; t < len; ++t) {
          const T xv = c.x_out[t * d + j];
          if (xv > floor) dx[t * d + j] = scale * std::pow(xv, p - T(1));
        }
      }
      break;
    }
    case Pooling::kAverage:
      for (std::size_t t = 0; t < len; ++t) k::axpy(inv_len, dpooled.data(), dx.data() + t * d, d);
      break;
    case Pooling::kMax:
      for (std::size_t j = 0; j < d; ++j) dx[c.argmax[j] * d + j] = dpooled[j];
      break;
  }

  const T inv_sqrt_s = T(1) / std::sqrt(static_cast<T>(s));
  std::vector<T> h(len * e), dh(len * e), du(len * e), dav(len * e), dv(len * e);
  std::vector<T> attn(len * len), ds(len * len);
  std::vector<T> dq(len * s), dk(len * s), dz(len * s), dn(len * d);
  for (std::size_t bi = cfg_.num_blocks; bi-- > 0;) {
    const auto& bl = lay.blocks[bi];
    const auto& bc = c.blocks[bi];

    // O = H W_o + b_o, residual passes dx through unchanged.
    for (std::size_t i = 0; i < len * e; ++i) h[i] = bc.u[i] * bc.av[i];
    k::gemm_tn_acc(e, d, len, h.data(), dx.data(), grads[bl.w_o].data());
    for (std::size_t t = 0; t < len; ++t) k::axpy(T(1), dx.data() + t * d, grads[bl.b_o].data(), d);
    k::gemm_nt(len, e, d, dx.data(), params[bl.w_o].data(), dh.data());

    // H = U * (A V)
    for (std::size_t i = 0; i < len * e; ++i) {
      du[i] = dh[i] * bc.av[i];
      dav[i] = dh[i] * bc.u[i];
    }
    for (std::size_t i = 0; i < len * len; ++i) attn[i] = bc.relu_s[i] * bc.relu_s[i] * inv_len;
    std::fill(dv.begin(), dv.end(), T(0));
    k::gemm_tn_acc(len, e, len, attn.data(), dav.data(), dv.data());
    k::gemm_nt(len, len, e, dav.data(), bc.v.data(), ds.data());
    // A = relu(S)^2 / L with S = q k^T / sqrt(s)
    const T ds_scale = T(2) * inv_len * inv_sqrt_s;
    for (std::size_t i = 0; i < len * len; ++i) ds[i] *= ds_scale * bc.relu_s[i];
    k::gemm_nn(len, s, len, ds.data(), bc.k.data(), dq.data());
    std::fill(dk.begin(), dk.end(), T(0));
    k::gemm_tn_acc(len, s, len, ds.data(), bc.q.data(), dk.data());
    if (!rope_cos_.empty()) {
      rotate(dq.data(), len, s, rope_cos_, rope_sin_, true);
      rotate(dk.data(), len, s, rope_cos_, rope_sin_, true);
    }

    const T* gq = params[bl.gamma_q].data();
    const T* gk = params[bl.gamma_k].data();
    T* dgq = grads[bl.gamma_q].data();
    T* dbq = grads[bl.beta_q].data();
    T* dgk = grads[bl.gamma_k].data();
    T* dbk = grads[bl.beta_k].data();
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t j = 0; j < s; ++j) {
        const std::size_t i = t * s + j;
        const T zv = bc.z[i];
        dgq[j] += dq[i] * zv;
        dbq[j] += dq[i];
        dgk[j] += dk[i] * zv;
        dbk[j] += dk[i];
        dz[i] = dq[i] * gq[j] + dk[i] * gk[j];
      }

    // Swish gates.
    for (std::size_t i = 0; i < len * e; ++i) {
      const T pu = bc.pre_u[i];
      const T su = sigmoid(pu);
      du[i] *= su * (T(1) + pu * (T(1) - su));
      const T pv = bc.pre_v[i];
      const T sv = sigmoid(pv);
      dv[i] *= sv * (T(1) + pv * (T(1) - sv));
    }
    k::gemm_tn_acc(d, e, len, bc.normed.data(), du.data(), grads[bl.w_u].data());
    k::gemm_tn_acc(d, e, len, bc.normed.data(), dv.data(), grads[bl.w_v].data());
    k::gemm_tn_acc(d, s, len, bc.normed.data(), dz.data(), grads[bl.w_z].data());
    k::gemm_nt(len, d, e, du.data(), params[bl.w_u].data(), dn.data());
    k::gemm_nt(len, d, e, dv.data(), params[bl.w_v].data(), dn.data(), true);
    k::gemm_nt(len, d, s, dz.data(), params[bl.w_z].data(), dn.data(), true);

    // ScaleNorm: n = g x / max(|x|, eps)
    const T gain = params[bl.norm_gain].values[0];
    T dgain = 0;
    for (std::size_t t = 0; t < len; ++t) {
      const T* xr = bc.x_in.data() + t * d;
      const T* dnr = dn.data() + t * d;
      T* dxr = dx.data() + t * d;
      const T r = bc.row_norm[t];
      const T xdn = k::dot(xr, dnr, d);
      dgain += xdn / r;
      if (r > static_cast<T>(kNormEps)) {
        const T coef = xdn / (r * r);
        for (std::size_t j = 0; j < d; ++j) dxr[j] += gain / r * (dnr[j] - xr[j] * coef);
      } else {
        for (std::size_t j = 0; j < d; ++j) dxr[j] += gain / r * dnr[j];
      }
    }
    grads[bl.norm_gain].values[0] += dgain;
  }

  // Absolute positions and input projection.
  if (lay.pos_scale != ParamLayout::npos) {
    T dscale = 0;
    for (std::size_t t = 0; t < len; ++t) dscale += k::dot(dx.data() + t * d, pos_table_.data() + t * d, d);
    grads[lay.pos_scale].values[0] += dscale;
  }
  T* dw_in = grads[lay.input_kernel].data();
  T* db_in = grads[lay.input_bias].data();
  for (std::size_t t = 0; t < len; ++t) {
    const T* dxr = dx.data() + t * d;
    k::axpy(T(1), dxr, db_in, d);
    for (std::size_t b = 0; b < cfg_.bits_per_char; ++b)
      if ((c.codepoint_bits[t] >> b) & 1u) k::axpy(T(1), dxr, dw_in + b * d, d);
  }

  for (const auto& t : grads.tensors())
    require(all_finite(t.values), ErrorKind::kNumeric, "non-finite gradient in tensor " + t.name);
}

template class GauNetwork<float>;
template class GauNetwork<double>;

}  // namespace dupsim
