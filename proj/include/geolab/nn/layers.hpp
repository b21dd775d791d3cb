#pragma once

#include <string>

#include "geolab/nn/ops.hpp"

namespace geolab::nn {

// Layer blocks name their parameters "<prefix>.<part>" inside a
// ParameterStore and look them up at forward time, so a store can be copied
// or reloaded without invalidating the layer objects.

/// `bias = false` registers only "<prefix>.W".
struct Linear {
  std::string prefix;
  std::size_t in = 0, out = 0;
  bool bias = true;

  Linear() = default;
  Linear(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out, Rng& rng, double gain = 1.0,
         bool bias = true);
  Var operator()(Graph& g, ParameterStore& store, Var x) const;
};

struct LayerNorm {
  std::string prefix;
  std::size_t dim = 0;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, std::string prefix, std::size_t dim, Rng& rng);
  Var operator()(Graph& g, ParameterStore& store, Var x) const;
};

/// Scaled dot-product attention with `heads` heads. `mask` is additive:
/// empty, 1 x Nk (per key) or Nq x Nk; masked slots carry -1e9. The key
/// projection has no bias, since softmax cancels it.
struct MultiHeadAttention {
  std::string prefix;
  std::size_t dim = 0, heads = 1;
  Linear q, k, v, o;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, std::string prefix, std::size_t dim, std::size_t heads, Rng& rng);
  Var operator()(Graph& g, ParameterStore& store, Var queries, Var keys_values, const Mat& mask = Mat()) const;
};

/// Two-layer GELU MLP.
struct FeedForward {
  Linear up, down;

  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& prefix, std::size_t dim, std::size_t hidden, Rng& rng);
  Var operator()(Graph& g, ParameterStore& store, Var x) const;
};

/// Pre-norm transformer encoder layer.
struct EncoderLayer {
  LayerNorm ln1, ln2;
  MultiHeadAttention attn;
  FeedForward ff;

  EncoderLayer() = default;
  EncoderLayer(ParameterStore& store, const std::string& prefix, std::size_t dim, std::size_t heads,
               std::size_t ff_dim, Rng& rng);
  Var operator()(Graph& g, ParameterStore& store, Var x, const Mat& mask = Mat()) const;
};

/// Pre-norm decoder layer without self-attention: queries cross-attend to a
/// memory, then pass through the feed-forward block.
struct CrossDecoderLayer {
  LayerNorm ln1, ln2;
  MultiHeadAttention cross;
  FeedForward ff;

  CrossDecoderLayer() = default;
  CrossDecoderLayer(ParameterStore& store, const std::string& prefix, std::size_t dim, std::size_t heads,
                    std::size_t ff_dim, Rng& rng);
  Var operator()(Graph& g, ParameterStore& store, Var queries, Var memory) const;
};

inline constexpr double kMaskedLogit = -1e9;

}  // namespace geolab::nn
