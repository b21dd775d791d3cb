#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "geolab/finetune.hpp"
#include "geolab/pretrain.hpp"
#include "geolab/probe.hpp"
#include "geolab/synth.hpp"

namespace geolab {

inline constexpr int kFormatVersion = 1;

enum class HeadInit { Pretrained, RandomHeads };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "runs/default";
  std::size_t jobs = 1;

  // [corpus]
  GeneratorSpec generator;
  std::size_t pretrain_docs = 500;
  std::size_t finetune_docs = 100;
  std::size_t test_docs = 50;
  double segmentation_prob = 0.9;
  /// "synthetic", or "funsd" to read funsd_train / funsd_test directories.
  std::string source = "synthetic";
  std::filesystem::path funsd_train, funsd_test;
  bool flip_links = false;  ///< FUNSD linking pairs are [son, father]

  // [model]
  ModelConfig model;

  PretrainConfig pretrain;
  FinetuneConfig finetune;
  HeadInit init = HeadInit::Pretrained;
  std::size_t finetune_train_docs = 0;  ///< documents used for fine-tuning, 0 = all
  DecodeConfig decode;
  ProbeConfig probe;
  std::size_t probe_train_docs = 40;
  std::size_t probe_test_docs = 20;
  std::vector<std::size_t> fewshot_shots{1, 5, 10, 20};
  std::vector<std::uint64_t> seeds{1, 2, 3};

  /// Sorted "section.key=value" lines of every setting; the hash input.
  std::string canonical() const;
  /// FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;
};

/// Reads an INI file. Unknown sections or keys and malformed values raise
/// ConfigError naming the key; missing keys keep their defaults.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);
/// INI text that parses back to an equal configuration.
std::string to_ini(const ExperimentConfig& cfg);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace geolab
