#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "geolab/encoder.hpp"
#include "geolab/heads.hpp"
#include "geolab/nn/checkpoint.hpp"

namespace geolab {

struct ModelConfig {
  EncoderConfig encoder;
  HeadsConfig heads;

  /// Keeps the shared sizes (hidden, vocabulary) consistent and validates.
  void finalize();
  std::map<std::string, std::string> to_manifest() const;
  static ModelConfig from_manifest(const std::map<std::string, std::string>& m);
};

/// Encoder plus heads over one parameter store.
class GeoModel {
 public:
  GeoModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& store() { return store_; }
  const nn::ParameterStore& store() const { return store_; }
  const TextLayoutEncoder& encoder() const { return encoder_; }
  const Heads& heads() const { return heads_; }

  /// Fresh random CRP, pair-extractor and RFE weights.
  void reinit_relation_heads(std::uint64_t seed);

  /// Writes a GEOL checkpoint; `extra` entries are added to the manifest.
  void save(const std::filesystem::path& path, const std::map<std::string, std::string>& extra = {}) const;
  /// Rebuilds the model described by a checkpoint manifest and loads it.
  static GeoModel load(const std::filesystem::path& path, std::map<std::string, std::string>* manifest = nullptr);

 private:
  ModelConfig cfg_;
  nn::ParameterStore store_;
  TextLayoutEncoder encoder_;
  Heads heads_;
};

}  // namespace geolab
