#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "geolab/config.hpp"
#include "geolab/nn/grad_check.hpp"
#include "geolab/segmentation.hpp"

namespace geolab {

// In-memory pipeline pieces shared by the CLI and the acceptance driver.

struct Corpora {
  Vocabulary vocab;
  std::vector<Document> pretrain, finetune, test;
  SegmentationStats segmentation;
};

/// Synthetic (or FUNSD) corpora for one seed, tokenized and truncated to the
/// model's token limit. The pre-training split is re-segmented.
Corpora build_corpora(const ExperimentConfig& cfg, std::uint64_t seed, std::ostream* log = nullptr);

ModelConfig model_config(const ExperimentConfig& cfg, const Vocabulary& vocab);

GeoModel run_pretrain(const ExperimentConfig& cfg, const Corpora& data, const TaskToggles& tasks, std::uint64_t seed,
                      PretrainLog* log = nullptr, std::ostream* out = nullptr);

/// Copy of `base` fine-tuned on `train`; RandomHeads re-draws CRP, pair
/// extractor and RFE first.
GeoModel run_finetune(const GeoModel& base, const std::vector<Document>& train, const FinetuneConfig& ft, HeadInit init,
                      std::uint64_t seed, std::vector<double>* log = nullptr);

/// First `n` documents (all when n is 0 or larger than the set).
std::vector<Document> head_of(const std::vector<Document>& docs, std::size_t n);

// Artifact stages. Every stage directory holds stamp.json with the producing
// stage, config hash, seed and format version.

struct Workspace {
  std::filesystem::path root;
  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path labels() const { return root / "labels"; }
  std::filesystem::path pretrain() const { return root / "pretrain"; }
  std::filesystem::path finetune() const { return root / "finetune"; }
  std::filesystem::path metrics() const { return root / "metrics"; }
  std::filesystem::path ablate() const { return root / "ablate"; }
  std::filesystem::path report() const { return root / "report"; }
};

struct RunOptions {
  bool force = false;
  std::size_t jobs = 1;
  std::ostream* log = nullptr;
};

void cmd_gen_corpus(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_prepare_labels(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_pretrain(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_finetune(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opt);
void cmd_probe(const ExperimentConfig& cfg, const RunOptions& opt);
/// `grid` is one of tasks, heads, rsf, fewshot, all.
void cmd_ablate(const ExperimentConfig& cfg, const std::string& grid, const RunOptions& opt);
void cmd_report(const ExperimentConfig& cfg, const RunOptions& opt);

struct GradCheckEntry {
  std::string name;
  nn::GradCheckResult result;
};

/// Finite-difference checks of every layer, head and loss on small random
/// instances.
std::vector<GradCheckEntry> run_grad_checks(std::uint64_t seed);
void cmd_grad_check(const ExperimentConfig& cfg, const RunOptions& opt);

}  // namespace geolab
