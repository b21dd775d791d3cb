#pragma once

#include <array>
#include <vector>

#include "geolab/nn/layers.hpp"

namespace geolab {

/// SER tags: O, then B-/I- for header, question, answer.
inline constexpr std::size_t kNumSerTags = 7;

struct HeadsConfig {
  std::size_t hidden = 256;        ///< segment feature size d
  std::size_t relation_dim = 256;  ///< pair feature size d_r
  std::size_t rfe_heads = 2;
  std::size_t rfe_ff = 512;
  std::size_t positive_cap = 128;
  std::size_t vocab_size = 0;

  void validate() const;
};

using Triplet = std::array<std::size_t, 3>;

struct RefinedRelations {
  nn::Var logits;  ///< n x n, pre-sigmoid r1
  std::vector<nn::IndexPair> positives;
  bool used_fallback = false;
};

/// Relation, geometric and token heads over encoder outputs. Relation
/// matrices index [son i][father j].
class Heads {
 public:
  Heads() = default;
  Heads(nn::ParameterStore& store, const HeadsConfig& cfg, Rng& rng);

  const HeadsConfig& config() const { return cfg_; }

  /// n x n logits of the coarse relation matrix: B_i W B_j^T + b.
  nn::Var crp_logits(nn::Graph& g, nn::ParameterStore& store, nn::Var B) const;
  /// Pair features W_a B_i + W_b B_j + b for the listed (i, j).
  nn::Var pair_features(nn::Graph& g, nn::ParameterStore& store, nn::Var B, std::span<const nn::IndexPair> pairs) const;
  /// Per-query logits (k x 1): the positive set is self-attended into a
  /// memory that the queries cross-attend to.
  nn::Var rfe_logits(nn::Graph& g, nn::ParameterStore& store, nn::Var positives, nn::Var queries) const;
  /// Positive pairs: off-diagonal r0 > 0.5, highest first, at most
  /// positive_cap; when none qualifies, the single highest off-diagonal pair.
  std::vector<nn::IndexPair> select_positives(const nn::Mat& r0, bool* fallback = nullptr) const;
  RefinedRelations refine(nn::Graph& g, nn::ParameterStore& store, nn::Var B, const nn::Mat& r0) const;

  /// k x 9 direction logits for the ordered pairs.
  nn::Var direction_logits(nn::Graph& g, nn::ParameterStore& store, nn::Var B, std::span<const nn::IndexPair> pairs) const;
  /// k x 5 collinearity logits from B_i + B_j + B_k (summed in sorted index
  /// order, so permutations give identical floats).
  nn::Var cit_logits(nn::Graph& g, nn::ParameterStore& store, nn::Var B, std::span<const Triplet> triplets) const;
  /// k x |V| logits at the given token rows.
  nn::Var mvlm_logits(nn::Graph& g, nn::ParameterStore& store, nn::Var tokens, std::span<const std::size_t> rows) const;
  /// T x 7 tag logits.
  nn::Var ser_logits(nn::Graph& g, nn::ParameterStore& store, nn::Var tokens) const;

  /// Parameter name prefixes of the relation heads (CRP, pair extractor, RFE).
  static std::vector<std::string> relation_prefixes() { return {"crp.", "pair.", "rfe."}; }

 private:
  HeadsConfig cfg_;
  nn::EncoderLayer rfe_enc_;
  nn::LayerNorm rfe_memory_ln_;
  nn::CrossDecoderLayer rfe_dec_;
  nn::LayerNorm rfe_out_ln_;
  nn::Linear rfe_out_;
  nn::Linear cit_, mvlm_, ser_hidden_, ser_out_;
};

}  // namespace geolab
