#include "geolab/nn/layers.hpp"

#include <cmath>

#include "geolab/errors.hpp"

namespace geolab::nn {

Linear::Linear(ParameterStore& store, std::string p, std::size_t in_dim, std::size_t out_dim, Rng& rng, double gain,
               bool with_bias)
    : prefix(std::move(p)), in(in_dim), out(out_dim), bias(with_bias) {
  store.add(prefix + ".W", in, out, Init::Xavier, rng, gain);
  if (bias) store.add(prefix + ".b", 0, out, Init::Zeros, rng);
}

Var Linear::operator()(Graph& g, ParameterStore& store, Var x) const {
  if (!bias) return matmul(x, g.param(store.at(prefix + ".W")));
  return affine(x, g.param(store.at(prefix + ".W")), g.param(store.at(prefix + ".b")));
}

LayerNorm::LayerNorm(ParameterStore& store, std::string p, std::size_t d, Rng& rng) : prefix(std::move(p)), dim(d) {
  store.add(prefix + ".g", 0, dim, Init::Ones, rng);
  store.add(prefix + ".b", 0, dim, Init::Zeros, rng);
}

Var LayerNorm::operator()(Graph& g, ParameterStore& store, Var x) const {
  return layer_norm(x, g.param(store.at(prefix + ".g")), g.param(store.at(prefix + ".b")));
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, std::string p, std::size_t d, std::size_t h, Rng& rng)
    : prefix(std::move(p)), dim(d), heads(h) {
  if (h == 0 || d % h != 0) throw DimensionError("attention dim " + std::to_string(d) + " not divisible by " + std::to_string(h) + " heads");
  q = Linear(store, prefix + ".q", d, d, rng);
  k = Linear(store, prefix + ".k", d, d, rng, 1.0, false);
  v = Linear(store, prefix + ".v", d, d, rng);
  o = Linear(store, prefix + ".o", d, d, rng);
}

Var MultiHeadAttention::operator()(Graph& g, ParameterStore& store, Var queries, Var keys_values, const Mat& mask) const {
  Var Q = q(g, store, queries);
  Var K = k(g, store, keys_values);
  Var V = v(g, store, keys_values);
  const auto dh = static_cast<Eigen::Index>(dim / heads);
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const auto start = static_cast<Eigen::Index>(h) * dh;
    Var scores = scale(matmul_nt(slice_cols(Q, start, dh), slice_cols(K, start, dh)), inv);
    if (mask.size() != 0) scores = add_constant(scores, mask);
    outs.push_back(matmul(softmax_rows(scores), slice_cols(V, start, dh)));
  }
  Var merged = heads == 1 ? outs[0] : concat_cols(outs);
  return o(g, store, merged);
}

FeedForward::FeedForward(ParameterStore& store, const std::string& prefix, std::size_t dim, std::size_t hidden, Rng& rng)
    : up(store, prefix + ".up", dim, hidden, rng), down(store, prefix + ".down", hidden, dim, rng) {}

Var FeedForward::operator()(Graph& g, ParameterStore& store, Var x) const { return down(g, store, gelu(up(g, store, x))); }

EncoderLayer::EncoderLayer(ParameterStore& store, const std::string& prefix, std::size_t dim, std::size_t heads,
                           std::size_t ff_dim, Rng& rng)
    : ln1(store, prefix + ".ln1", dim, rng),
      ln2(store, prefix + ".ln2", dim, rng),
      attn(store, prefix + ".attn", dim, heads, rng),
      ff(store, prefix + ".ff", dim, ff_dim, rng) {}

Var EncoderLayer::operator()(Graph& g, ParameterStore& store, Var x, const Mat& mask) const {
  Var h = ln1(g, store, x);
  x = add(x, attn(g, store, h, h, mask));
  return add(x, ff(g, store, ln2(g, store, x)));
}

CrossDecoderLayer::CrossDecoderLayer(ParameterStore& store, const std::string& prefix, std::size_t dim,
                                     std::size_t heads, std::size_t ff_dim, Rng& rng)
    : ln1(store, prefix + ".ln1", dim, rng),
      ln2(store, prefix + ".ln2", dim, rng),
      cross(store, prefix + ".cross", dim, heads, rng),
      ff(store, prefix + ".ff", dim, ff_dim, rng) {}

Var CrossDecoderLayer::operator()(Graph& g, ParameterStore& store, Var queries, Var memory) const {
  Var x = add(queries, cross(g, store, ln1(g, store, queries), memory));
  return add(x, ff(g, store, ln2(g, store, x)));
}

}  // namespace geolab::nn
