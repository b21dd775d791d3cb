#include "geolab/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "geolab/errors.hpp"
#include "geolab/geometry.hpp"

namespace geolab {

using namespace nn;

namespace {
// Output layers start small so every classifier begins close to uniform.
constexpr double kOutputGain = 0.1;
}  // namespace

void HeadsConfig::validate() const {
  if (hidden == 0 || relation_dim == 0) throw ConfigError("head dimensions must be positive");
  if (rfe_heads == 0 || relation_dim % rfe_heads != 0)
    throw ConfigError("relation_dim must be a multiple of rfe_heads");
  if (positive_cap == 0) throw ConfigError("positive_cap must be positive");
  if (vocab_size == 0) throw ConfigError("heads need the vocabulary size");
}

Heads::Heads(ParameterStore& store, const HeadsConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const auto d = cfg_.hidden, dr = cfg_.relation_dim;
  // The bilinear score sums d^2 products, hence the extra 1/sqrt(d).
  store.add("crp.W", d, d, Init::Xavier, rng, kOutputGain / std::sqrt(static_cast<double>(d)));
  store.add("crp.b", 0, 1, Init::Zeros, rng);
  store.add("pair.Wa", d, dr, Init::Xavier, rng, 1.0);
  store.add("pair.Wb", d, dr, Init::Xavier, rng, 1.0);
  store.add("pair.b", 0, dr, Init::Zeros, rng);
  rfe_enc_ = EncoderLayer(store, "rfe.enc", dr, cfg_.rfe_heads, cfg_.rfe_ff, rng);
  rfe_memory_ln_ = LayerNorm(store, "rfe.enc.norm", dr, rng);
  rfe_dec_ = CrossDecoderLayer(store, "rfe.dec", dr, cfg_.rfe_heads, cfg_.rfe_ff, rng);
  rfe_out_ln_ = LayerNorm(store, "rfe.dec.norm", dr, rng);
  rfe_out_ = Linear(store, "rfe.out", dr, 1, rng, kOutputGain);
  store.add("dir.Wa", d, kNumDirections, Init::Xavier, rng, kOutputGain);
  store.add("dir.Wb", d, kNumDirections, Init::Xavier, rng, kOutputGain);
  store.add("dir.b", 0, kNumDirections, Init::Zeros, rng);
  cit_ = Linear(store, "cit", d, kNumCollinearClasses, rng, kOutputGain);
  mvlm_ = Linear(store, "mvlm", d, cfg_.vocab_size, rng, kOutputGain);
  ser_hidden_ = Linear(store, "ser.hidden", d, d, rng);
  ser_out_ = Linear(store, "ser.out", d, kNumSerTags, rng, kOutputGain);
}

Var Heads::crp_logits(Graph& g, ParameterStore& store, Var B) const {
  Var s = bilinear_form(B, g.param(store.at("crp.W")), B);
  Var bias_row = matmul(g.param(store.at("crp.b")), g.constant(Mat::Ones(1, s.cols())));
  return add_bias(s, bias_row);
}

Var Heads::pair_features(Graph& g, ParameterStore& store, Var B, std::span<const IndexPair> pairs) const {
  Var p = affine(B, g.param(store.at("pair.Wa")), g.param(store.at("pair.b")));
  Var q = matmul(B, g.param(store.at("pair.Wb")));
  return pair_sum(p, q, pairs);
}

Var Heads::rfe_logits(Graph& g, ParameterStore& store, Var positives, Var queries) const {
  if (positives.rows() == 0) throw InvalidInputError("relation feature enhancement needs a non-empty positive set");
  Var memory = rfe_memory_ln_(g, store, rfe_enc_(g, store, positives));
  Var x = rfe_out_ln_(g, store, rfe_dec_(g, store, queries, memory));
  return rfe_out_(g, store, x);
}

std::vector<IndexPair> Heads::select_positives(const Mat& r0, bool* fallback) const {
  const auto n = static_cast<std::size_t>(r0.rows());
  std::vector<IndexPair> pos;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && r0(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) > 0.5) pos.emplace_back(i, j);
  auto prob = [&](const IndexPair& p) { return r0(static_cast<Eigen::Index>(p.first), static_cast<Eigen::Index>(p.second)); };
  if (pos.size() > cfg_.positive_cap) {
    std::stable_sort(pos.begin(), pos.end(), [&](const IndexPair& a, const IndexPair& b) { return prob(a) > prob(b); });
    pos.resize(cfg_.positive_cap);
    std::sort(pos.begin(), pos.end());
  }
  if (fallback) *fallback = pos.empty();
  if (pos.empty() && n > 0) {
    IndexPair best{0, n > 1 ? 1 : 0};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && prob({i, j}) > prob(best)) best = {i, j};
    pos.push_back(best);
  }
  return pos;
}

RefinedRelations Heads::refine(Graph& g, ParameterStore& store, Var B, const Mat& r0) const {
  const auto n = static_cast<std::size_t>(B.rows());
  if (static_cast<std::size_t>(r0.rows()) != n || static_cast<std::size_t>(r0.cols()) != n)
    throw DimensionError("r0 is " + shape_string(r0) + " but there are " + std::to_string(n) + " segments");
  RefinedRelations out;
  out.positives = select_positives(r0, &out.used_fallback);
  std::vector<IndexPair> all;
  all.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) all.emplace_back(i, j);
  // Both sets come from one projection so positives are rows of the full table.
  Var p = affine(B, g.param(store.at("pair.Wa")), g.param(store.at("pair.b")));
  Var q = matmul(B, g.param(store.at("pair.Wb")));
  Var queries = pair_sum(p, q, all);
  std::vector<std::size_t> rows;
  rows.reserve(out.positives.size());
  for (const auto& [i, j] : out.positives) rows.push_back(i * n + j);
  Var positives = gather_rows(queries, rows);
  out.logits = reshape(rfe_logits(g, store, positives, queries), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  return out;
}

Var Heads::direction_logits(Graph& g, ParameterStore& store, Var B, std::span<const IndexPair> pairs) const {
  Var p = affine(B, g.param(store.at("dir.Wa")), g.param(store.at("dir.b")));
  Var q = matmul(B, g.param(store.at("dir.Wb")));
  return pair_sum(p, q, pairs);
}

Var Heads::cit_logits(Graph& g, ParameterStore& store, Var B, std::span<const Triplet> triplets) const {
  std::array<std::vector<std::size_t>, 3> cols;
  for (const Triplet& t : triplets) {
    Triplet s = t;
    std::sort(s.begin(), s.end());
    for (int k = 0; k < 3; ++k) cols[k].push_back(s[k]);
  }
  Var sum3 = add(add(gather_rows(B, cols[0]), gather_rows(B, cols[1])), gather_rows(B, cols[2]));
  return cit_(g, store, sum3);
}

Var Heads::mvlm_logits(Graph& g, ParameterStore& store, Var tokens, std::span<const std::size_t> rows) const {
  return mvlm_(g, store, gather_rows(tokens, rows));
}

Var Heads::ser_logits(Graph& g, ParameterStore& store, Var tokens) const {
  return ser_out_(g, store, gelu(ser_hidden_(g, store, tokens)));
}

}  // namespace geolab
