#include "geolab/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "geolab/errors.hpp"

namespace geolab {

namespace {
constexpr const char* kBoxNames[kNumBoxParts] = {"x1", "y1", "x2", "y2", "w", "h"};
}

void EncoderConfig::validate() const {
  if (vocab_size <= static_cast<std::size_t>(Vocabulary::kNumReserved))
    throw ConfigError("encoder vocabulary must contain more than the reserved tokens");
  if (hidden == 0 || heads == 0 || hidden % heads != 0)
    throw ConfigError("hidden size " + std::to_string(hidden) + " must be a positive multiple of heads " +
                      std::to_string(heads));
  if (ff == 0) throw ConfigError("feed-forward size must be positive");
  if (max_tokens < 2) throw ConfigError("max_tokens must be at least 2");
  if (coord_buckets < 2) throw ConfigError("coord_buckets must be at least 2");
}

nn::Mat TokenInputs::key_mask() const {
  nn::Mat m = nn::Mat::Zero(1, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t t = real_tokens; t < ids.size(); ++t) m(0, static_cast<Eigen::Index>(t)) = nn::kMaskedLogit;
  return m;
}

int coord_bucket(double v, double page_extent, std::size_t buckets) {
  const double top = static_cast<double>(buckets - 1);
  const double b = std::round(v / page_extent * top);
  return static_cast<int>(std::clamp(b, 0.0, top));
}

TokenInputs build_token_inputs(const Document& doc, const EncoderConfig& cfg, std::size_t pad_to) {
  const std::size_t total = doc.token_count() + 1;
  if (total > cfg.max_tokens)
    throw InvalidInputError("document " + doc.id + " has " + std::to_string(total) + " tokens, limit " +
                            std::to_string(cfg.max_tokens));
  if (doc.segments.size() > cfg.max_segments)
    throw InvalidInputError("document " + doc.id + " has too many segments");
  const std::size_t len = std::max(total, pad_to);
  if (len > cfg.max_tokens) throw InvalidInputError("padding length exceeds max_tokens");

  TokenInputs in;
  in.ids.reserve(len);
  auto push = [&](int id, int rank, Bie bie, const std::array<int, kNumBoxParts>& box, int seg) {
    in.position.push_back(static_cast<int>(in.ids.size()));
    in.ids.push_back(id);
    in.rank.push_back(rank);
    in.bie.push_back(static_cast<int>(bie));
    for (std::size_t k = 0; k < kNumBoxParts; ++k) in.box[k].push_back(box[k]);
    in.token_segment.push_back(seg);
  };
  const std::array<int, kNumBoxParts> zero{};
  push(Vocabulary::kCls, 0, Bie::None, zero, -1);

  const auto nb = cfg.coord_buckets;
  for (std::size_t s = 0; s < doc.segments.size(); ++s) {
    const TextSegment& seg = doc.segments[s];
    if (seg.token_ids.empty()) throw InvalidInputError("segment " + std::to_string(seg.id) + " has no tokens");
    const BBox& b = seg.box;
    const std::array<int, kNumBoxParts> box{
        coord_bucket(b.x1, doc.page_width, nb),     coord_bucket(b.y1, doc.page_height, nb),
        coord_bucket(b.x2, doc.page_width, nb),     coord_bucket(b.y2, doc.page_height, nb),
        coord_bucket(b.width(), doc.page_width, nb), coord_bucket(b.height(), doc.page_height, nb)};
    in.first_token.push_back(in.ids.size());
    const std::size_t n = seg.token_ids.size();
    for (std::size_t t = 0; t < n; ++t) {
      const Bie bie = t == 0 ? Bie::Begin : (t + 1 == n ? Bie::End : Bie::Inside);
      push(seg.token_ids[t], static_cast<int>(s + 1), bie, box, static_cast<int>(s));
    }
  }
  in.real_tokens = in.ids.size();
  while (in.ids.size() < len) push(Vocabulary::kPad, 0, Bie::None, zero, -1);
  return in;
}

TextLayoutEncoder::TextLayoutEncoder(nn::ParameterStore& store, const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const auto d = cfg_.hidden;
  store.add("emb.tok", cfg_.vocab_size, d, nn::Init::Normal, rng);
  store.add("emb.pos", cfg_.max_tokens, d, nn::Init::Normal, rng);
  store.add("emb.rank", cfg_.max_segments + 1, d, nn::Init::Normal, rng);
  store.add("emb.bie", kNumBie, d, nn::Init::Normal, rng);
  for (const char* part : kBoxNames) store.add(std::string("emb.box.") + part, cfg_.coord_buckets, d, nn::Init::Normal, rng);
  for (std::size_t l = 0; l < cfg_.layers; ++l)
    layers_.emplace_back(store, "enc." + std::to_string(l), d, cfg_.heads, cfg_.ff, rng);
  if (cfg_.layers > 0) final_ln_ = nn::LayerNorm(store, "enc.ln", d, rng);
}

nn::Var TextLayoutEncoder::embed(nn::Graph& g, nn::ParameterStore& store, const TokenInputs& in) const {
  using namespace nn;
  std::vector<Var> parts;
  parts.push_back(embedding_lookup(g.param(store.at("emb.tok")), in.ids));
  parts.push_back(embedding_lookup(g.param(store.at("emb.pos")), in.position));
  parts.push_back(embedding_lookup(g.param(store.at("emb.rank")), in.rank));
  parts.push_back(embedding_lookup(g.param(store.at("emb.bie")), in.bie));
  for (std::size_t k = 0; k < kNumBoxParts; ++k)
    parts.push_back(embedding_lookup(g.param(store.at(std::string("emb.box.") + kBoxNames[k])), in.box[k]));
  Var x = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) x = add(x, parts[i]);
  return x;
}

EncodedDocument TextLayoutEncoder::encode(nn::Graph& g, nn::ParameterStore& store, const TokenInputs& in,
                                          const std::vector<int>* ids_override) const {
  using namespace nn;
  Var x;
  if (ids_override) {
    if (ids_override->size() != in.ids.size()) throw DimensionError("masked id sequence length mismatch");
    TokenInputs masked = in;
    masked.ids = *ids_override;
    x = embed(g, store, masked);
  } else {
    x = embed(g, store, in);
  }
  EncodedDocument out;
  out.key_mask = in.real_tokens < in.size() ? in.key_mask() : Mat();
  for (const auto& layer : layers_) x = layer(g, store, x, out.key_mask);
  if (!layers_.empty()) x = final_ln_(g, store, x);
  out.tokens = x;
  out.segments = gather_rows(x, in.first_token);
  return out;
}

}  // namespace geolab
