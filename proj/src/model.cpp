#include "geolab/model.hpp"

#include "geolab/errors.hpp"

namespace geolab {

void ModelConfig::finalize() {
  heads.hidden = encoder.hidden;
  heads.vocab_size = encoder.vocab_size;
  encoder.validate();
  heads.validate();
}

std::map<std::string, std::string> ModelConfig::to_manifest() const {
  auto s = [](std::size_t v) { return std::to_string(v); };
  return {{"model.vocab_size", s(encoder.vocab_size)},   {"model.hidden", s(encoder.hidden)},
          {"model.layers", s(encoder.layers)},           {"model.heads", s(encoder.heads)},
          {"model.ff", s(encoder.ff)},                   {"model.max_tokens", s(encoder.max_tokens)},
          {"model.max_segments", s(encoder.max_segments)}, {"model.coord_buckets", s(encoder.coord_buckets)},
          {"model.relation_dim", s(heads.relation_dim)}, {"model.rfe_heads", s(heads.rfe_heads)},
          {"model.rfe_ff", s(heads.rfe_ff)},             {"model.positive_cap", s(heads.positive_cap)}};
}

ModelConfig ModelConfig::from_manifest(const std::map<std::string, std::string>& m) {
  auto get = [&](const std::string& k) -> std::size_t {
    auto it = m.find(k);
    if (it == m.end()) throw ArtifactError("checkpoint manifest lacks '" + k + "'");
    try {
      return static_cast<std::size_t>(std::stoull(it->second));
    } catch (const std::exception&) {
      throw ArtifactError("checkpoint manifest entry '" + k + "' is not an integer");
    }
  };
  ModelConfig c;
  c.encoder.vocab_size = get("model.vocab_size");
  c.encoder.hidden = get("model.hidden");
  c.encoder.layers = get("model.layers");
  c.encoder.heads = get("model.heads");
  c.encoder.ff = get("model.ff");
  c.encoder.max_tokens = get("model.max_tokens");
  c.encoder.max_segments = get("model.max_segments");
  c.encoder.coord_buckets = get("model.coord_buckets");
  c.heads.relation_dim = get("model.relation_dim");
  c.heads.rfe_heads = get("model.rfe_heads");
  c.heads.rfe_ff = get("model.rfe_ff");
  c.heads.positive_cap = get("model.positive_cap");
  c.finalize();
  return c;
}

GeoModel::GeoModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.finalize();
  Rng rng(seed);
  encoder_ = TextLayoutEncoder(store_, cfg_.encoder, rng);
  heads_ = Heads(store_, cfg_.heads, rng);
}

void GeoModel::reinit_relation_heads(std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& prefix : Heads::relation_prefixes()) store_.reinitialize(prefix, rng);
}

void GeoModel::save(const std::filesystem::path& path, const std::map<std::string, std::string>& extra) const {
  auto manifest = cfg_.to_manifest();
  for (const auto& [k, v] : extra) manifest[k] = v;
  nn::write_checkpoint(path, nn::snapshot(store_, std::move(manifest)));
}

GeoModel GeoModel::load(const std::filesystem::path& path, std::map<std::string, std::string>* manifest) {
  const nn::Checkpoint ckpt = nn::read_checkpoint(path);
  GeoModel model(ModelConfig::from_manifest(ckpt.manifest), 0);
  nn::load_into(model.store_, ckpt, true);
  if (manifest) *manifest = ckpt.manifest;
  return model;
}

}  // namespace geolab
