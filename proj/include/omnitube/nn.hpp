#pragma once

// Dense inference kernels: affine maps, softmax, layer normalization,
// multi-head attention, MLP heads, post-norm attention blocks and seeded
// parameter initialization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "omnitube/error.hpp"
#include "omnitube/random.hpp"
#include "omnitube/tensor.hpp"

namespace omnitube {

struct AffineParams {
  Tensor weight;  // [Din x Dout]
  Tensor bias;    // [Dout]
};

struct LayerNormParams {
  Tensor gamma;  // [D]
  Tensor beta;   // [D]
};

struct AttentionParams {
  AffineParams query, key, value, output;
  std::size_t heads = 8;
};

/// One post-norm block: x' = LN1(x + MHA(x, ctx, ctx)); y = LN2(x' + FFN(x')).
struct AttentionBlockParams {
  AttentionParams attention;
  AffineParams ff_in, ff_out;
  LayerNormParams norm1, norm2;
};

struct MlpParams {
  std::vector<AffineParams> layers;
};

inline constexpr double kLayerNormEps = 1e-5;

/// y = xW + b over the last axis; leading extents are preserved.
inline Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(weight.rank() == 2, ErrorKind::shape_mismatch, "affine weight must be a matrix");
  const std::size_t din = weight.extent(0), dout = weight.extent(1);
  require(x.cols() == din, ErrorKind::shape_mismatch,
          "affine input width " + std::to_string(x.cols()) + " vs weight " + shape_string(weight.shape()));
  require(bias.size() == dout, ErrorKind::shape_mismatch, "affine bias length");
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  Tensor y(out_shape);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    std::copy(bias.data().begin(), bias.data().end(), out.begin());
    for (std::size_t i = 0; i < din; ++i) {
      const double xi = in[i];
      if (xi == 0.0) continue;
      const double* w = weight.data().data() + i * dout;
      for (std::size_t o = 0; o < dout; ++o) out[o] += xi * w[o];
    }
  }
  return y;
}

inline Tensor affine(const Tensor& x, const AffineParams& p) { return affine(x, p.weight, p.bias); }

inline Tensor relu(Tensor x) {
  for (auto& v : x.data()) v = std::max(0.0, v);
  return x;
}

inline void softmax_inplace(std::span<double> v) {
  const double peak = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (auto& e : v) {
    e = std::exp(e - peak);
    total += e;
  }
  for (auto& e : v) e /= total;
}

/// Max-stabilized softmax along `axis`.
inline Tensor softmax(const Tensor& x, std::size_t axis) {
  require(axis < x.rank(), ErrorKind::invalid_argument, "softmax axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.extent(a);
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.extent(a);
  const std::size_t n = x.extent(axis);
  Tensor y = x;
  std::vector<double> buf(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      for (std::size_t k = 0; k < n; ++k) buf[k] = x[base + k * inner];
      softmax_inplace(buf);
      for (std::size_t k = 0; k < n; ++k) y[base + k * inner] = buf[k];
    }
  }
  return y;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = kLayerNormEps) {
  const std::size_t d = x.cols();
  require(gamma.size() == d && beta.size() == d, ErrorKind::shape_mismatch, "layer_norm parameter width");
  Tensor y = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto v = y.row(r);
    double mean = 0.0;
    for (double e : v) mean += e;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double e : v) var += (e - mean) * (e - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) v[c] = (v[c] - mean) * inv * gamma[c] + beta[c];
  }
  return y;
}

inline Tensor layer_norm(const Tensor& x, const LayerNormParams& p) { return layer_norm(x, p.gamma, p.beta); }

namespace detail {

struct Projected {
  Tensor q, k, v;
  std::size_t heads, head_dim;
  std::vector<std::size_t> order;  // key rows in canonical content order
};

// Sums over keys run in lexicographic order of the (key, value) rows, so a
// joint permutation of the key/value inputs gives bit-identical results.
inline std::vector<std::size_t> canonical_key_order(const Tensor& k, const Tensor& v) {
  std::vector<std::size_t> order(k.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = k.row(a), kb = k.row(b);
    if (!std::equal(ka.begin(), ka.end(), kb.begin()))
      return std::lexicographical_compare(ka.begin(), ka.end(), kb.begin(), kb.end());
    const auto va = v.row(a), vb = v.row(b);
    return std::lexicographical_compare(va.begin(), va.end(), vb.begin(), vb.end());
  });
  return order;
}

inline Projected project(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionParams& p) {
  require(q.rank() == 2 && k.rank() == 2 && v.rank() == 2, ErrorKind::shape_mismatch,
          "attention expects [L x D] matrices");
  require(k.rows() > 0 && k.rows() == v.rows(), ErrorKind::shape_mismatch, "key/value length mismatch");
  require(p.heads > 0, ErrorKind::invalid_argument, "attention head count must be positive");
  Projected out{affine(q, p.query), affine(k, p.key), affine(v, p.value), p.heads, 0, {}};
  const std::size_t d = out.q.cols();
  require(out.k.cols() == d && out.v.cols() == d, ErrorKind::shape_mismatch, "projected widths differ");
  require(d % p.heads == 0, ErrorKind::invalid_argument,
          "width " + std::to_string(d) + " not divisible by " + std::to_string(p.heads) + " heads");
  out.head_dim = d / p.heads;
  out.order = canonical_key_order(out.k, out.v);
  return out;
}

inline Tensor head_weights(const Projected& pr, std::size_t h) {
  const std::size_t lq = pr.q.rows(), lk = pr.k.rows(), hd = pr.head_dim, off = h * hd;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Tensor w = Tensor::matrix(lq, lk);
  std::vector<double> logits(lk);
  for (std::size_t i = 0; i < lq; ++i) {
    auto qi = pr.q.row(i);
    for (std::size_t t = 0; t < lk; ++t) {
      auto kj = pr.k.row(pr.order[t]);
      double dot = 0.0;
      for (std::size_t c = 0; c < hd; ++c) dot += qi[off + c] * kj[off + c];
      logits[t] = dot * scale;
    }
    softmax_inplace(logits);
    auto wi = w.row(i);
    for (std::size_t t = 0; t < lk; ++t) wi[pr.order[t]] = logits[t];
  }
  return w;
}

}  // namespace detail

/// Per-head row-stochastic attention maps, each [Lq x Lk].
inline std::vector<Tensor> attention_weights(const Tensor& q, const Tensor& k, const AttentionParams& p) {
  const auto pr = detail::project(q, k, k, p);
  std::vector<Tensor> maps;
  for (std::size_t h = 0; h < pr.heads; ++h) maps.push_back(detail::head_weights(pr, h));
  return maps;
}

/// Scaled dot-product attention over `heads` slices, followed by the output map.
inline Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionParams& p) {
  const auto pr = detail::project(q, k, v, p);
  const std::size_t lq = pr.q.rows(), lk = pr.k.rows(), hd = pr.head_dim;
  Tensor mixed = Tensor::matrix(lq, pr.q.cols());
  for (std::size_t h = 0; h < pr.heads; ++h) {
    const Tensor w = detail::head_weights(pr, h);
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < lq; ++i) {
      auto out = mixed.row(i);
      for (std::size_t t = 0; t < lk; ++t) {
        const std::size_t j = pr.order[t];
        const double a = w(i, j);
        auto vj = pr.v.row(j);
        for (std::size_t c = 0; c < hd; ++c) out[off + c] += a * vj[off + c];
      }
    }
  }
  return affine(mixed, p.output);
}

/// Affine layers with ReLU between them; the last layer stays linear.
inline Tensor mlp(const Tensor& x, const MlpParams& p) {
  require(!p.layers.empty(), ErrorKind::invalid_argument, "mlp without layers");
  Tensor h = x;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    h = affine(h, p.layers[i]);
    if (i + 1 < p.layers.size()) h = relu(std::move(h));
  }
  return h;
}

inline Tensor add(Tensor a, const Tensor& b) {
  require(a.size() == b.size(), ErrorKind::shape_mismatch, "elementwise add size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

/// Post-norm attention block with `context` as key/value source.
inline Tensor attention_block(const Tensor& x, const Tensor& context, const AttentionBlockParams& p) {
  Tensor a = layer_norm(add(x, multi_head_attention(x, context, context, p.attention)), p.norm1);
  Tensor ff = affine(relu(affine(a, p.ff_in)), p.ff_out);
  return layer_norm(add(std::move(a), ff), p.norm2);
}

inline Tensor self_attention_block(const Tensor& x, const AttentionBlockParams& p) {
  return attention_block(x, x, p);
}

// ---------------------------------------------------------------------------
// Parameters

enum class ParamKind { weight, bias, norm_scale, norm_shift, embedding };

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamKind kind;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered collection of named tensors; order is the serialization order.
class ParamSet {
 public:
  void add(std::string name, Tensor value) {
    require(!index_.contains(name), ErrorKind::invalid_argument, "duplicate parameter " + name);
    index_.emplace(name, items_.size());
    items_.push_back({std::move(name), std::move(value)});
  }

  bool contains(const std::string& name) const { return index_.contains(name); }

  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), ErrorKind::invalid_argument, "missing parameter " + name);
    return items_[it->second].value;
  }

  Tensor& get(const std::string& name) {
    return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).get(name));
  }

  const std::vector<NamedTensor>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.items_.size() != b.items_.size()) return false;
    for (std::size_t i = 0; i < a.items_.size(); ++i)
      if (a.items_[i].name != b.items_[i].name || !(a.items_[i].value == b.items_[i].value)) return false;
    return true;
  }

 private:
  std::vector<NamedTensor> items_;
  std::map<std::string, std::size_t> index_;
};

/// Half-width of the uniform range used for a weight with the given fan-in.
inline double init_range(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

/// Deterministic initialization: weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))
/// with fan_in = first extent, embeddings the same with fan_in = last extent,
/// biases and shifts zero, scales one. Values are rounded to float precision
/// so checkpoints reproduce them exactly.
inline ParamSet init_params(std::uint64_t seed, std::span<const ParamSpec> specs) {
  Rng rng(seed);
  ParamSet set;
  for (const auto& spec : specs) {
    Tensor t(spec.shape);
    switch (spec.kind) {
      case ParamKind::weight:
      case ParamKind::embedding: {
        const std::size_t fan_in = spec.kind == ParamKind::weight ? spec.shape.front() : spec.shape.back();
        const double a = init_range(fan_in);
        for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-a, a));
        break;
      }
      case ParamKind::bias:
      case ParamKind::norm_shift: break;
      case ParamKind::norm_scale: std::fill(t.data().begin(), t.data().end(), 1.0); break;
    }
    set.add(spec.name, std::move(t));
  }
  return set;
}

// Spec builders and binders share one naming scheme so a ParamSet produced
// from a spec list can always be bound back into typed parameters.

inline void spec_affine(std::vector<ParamSpec>& out, const std::string& name, std::size_t din, std::size_t dout) {
  out.push_back({name + ".weight", {din, dout}, ParamKind::weight});
  out.push_back({name + ".bias", {dout}, ParamKind::bias});
}

inline void spec_layer_norm(std::vector<ParamSpec>& out, const std::string& name, std::size_t d) {
  out.push_back({name + ".gamma", {d}, ParamKind::norm_scale});
  out.push_back({name + ".beta", {d}, ParamKind::norm_shift});
}

inline void spec_attention_block(std::vector<ParamSpec>& out, const std::string& name, std::size_t d,
                                 std::size_t ffn) {
  for (const char* proj : {"query", "key", "value", "output"}) spec_affine(out, name + ".attn." + proj, d, d);
  spec_affine(out, name + ".ff_in", d, ffn);
  spec_affine(out, name + ".ff_out", ffn, d);
  spec_layer_norm(out, name + ".norm1", d);
  spec_layer_norm(out, name + ".norm2", d);
}

inline void spec_mlp(std::vector<ParamSpec>& out, const std::string& name, std::span<const std::size_t> widths) {
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    spec_affine(out, name + ".layer" + std::to_string(i), widths[i], widths[i + 1]);
}

namespace detail {
inline const Tensor& fetch(const ParamSet& set, const std::string& name, const Shape& expected) {
  const Tensor& t = set.get(name);
  require(t.shape() == expected, ErrorKind::shape_mismatch,
          name + " has shape " + shape_string(t.shape()) + ", expected " + shape_string(expected));
  return t;
}
}  // namespace detail

inline AffineParams bind_affine(const ParamSet& set, const std::string& name, std::size_t din, std::size_t dout) {
  return {detail::fetch(set, name + ".weight", {din, dout}), detail::fetch(set, name + ".bias", {dout})};
}

inline LayerNormParams bind_layer_norm(const ParamSet& set, const std::string& name, std::size_t d) {
  return {detail::fetch(set, name + ".gamma", {d}), detail::fetch(set, name + ".beta", {d})};
}

inline AttentionBlockParams bind_attention_block(const ParamSet& set, const std::string& name, std::size_t d,
                                                 std::size_t ffn, std::size_t heads) {
  AttentionBlockParams p;
  p.attention.query = bind_affine(set, name + ".attn.query", d, d);
  p.attention.key = bind_affine(set, name + ".attn.key", d, d);
  p.attention.value = bind_affine(set, name + ".attn.value", d, d);
  p.attention.output = bind_affine(set, name + ".attn.output", d, d);
  p.attention.heads = heads;
  p.ff_in = bind_affine(set, name + ".ff_in", d, ffn);
  p.ff_out = bind_affine(set, name + ".ff_out", ffn, d);
  p.norm1 = bind_layer_norm(set, name + ".norm1", d);
  p.norm2 = bind_layer_norm(set, name + ".norm2", d);
  return p;
}

inline MlpParams bind_mlp(const ParamSet& set, const std::string& name, std::span<const std::size_t> widths) {
  MlpParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    p.layers.push_back(bind_affine(set, name + ".layer" + std::to_string(i), widths[i], widths[i + 1]));
  return p;
}

}  // namespace omnitube
