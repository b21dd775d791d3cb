#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geolab/model.hpp"
#include "geolab/nn/optim.hpp"

namespace geolab {

struct SamplingConfig {
  std::size_t ddm_anchors = 16;
  std::size_t ddm_partners = 32;
  std::size_t dde_positive = 20;
  std::size_t dde_sample = 20;
  double dde_ratio = 0.7;      ///< target share of d* pairs in the positive set
  double dde_threshold = 0.6;  ///< minimum share, else the document is skipped
  std::size_t cit_triplets = 16;
  /// Exhaustive collinear-triplet search up to this many segments, random
  /// probing beyond.
  std::size_t cit_exhaustive = 64;
  double mask_rate = 0.15;
  double mask_token = 0.8;
  double mask_random = 0.1;

  void validate() const;
};

struct DdmPair {
  std::size_t anchor = 0, partner = 0;
  int direction = 0;
  int nearest = 0;
  friend bool operator==(const DdmPair&, const DdmPair&) = default;
};

struct DdeSample {
  nn::IndexPair pair;
  int label = 0;
  friend bool operator==(const DdeSample&, const DdeSample&) = default;
};

struct DdeSet {
  bool skipped = true;
  int dominant = 0;
  std::vector<nn::IndexPair> positive;
  std::vector<DdeSample> sample;
  friend bool operator==(const DdeSet&, const DdeSet&) = default;
};

struct CitTriplet {
  Triplet t{};
  int cls = 0;
  friend bool operator==(const CitTriplet&, const CitTriplet&) = default;
};

/// Masked language-model targets over the token sequence.
struct MvlmMask {
  std::vector<std::size_t> positions;
  std::vector<int> original;
  std::vector<int> input_ids;  ///< full sequence after replacement
  std::size_t replaced_mask = 0, replaced_random = 0, kept = 0;
  friend bool operator==(const MvlmMask&, const MvlmMask&) = default;
};

struct GeoLabelSet {
  std::vector<DdmPair> ddm;
  DdeSet dde;
  std::vector<CitTriplet> cit;
  MvlmMask mvlm;
  friend bool operator==(const GeoLabelSet&, const GeoLabelSet&) = default;
};

std::vector<DdmPair> sample_ddm(const std::vector<BBox>& boxes, const SamplingConfig& cfg, Rng& rng);
DdeSet build_dde(const std::vector<BBox>& boxes, const SamplingConfig& cfg, Rng& rng);
std::vector<CitTriplet> sample_cit(const std::vector<BBox>& boxes, const SamplingConfig& cfg, Rng& rng);
/// Every triplet i < j < k whose collinearity is not None.
std::vector<Triplet> collinear_triplets(const std::vector<BBox>& boxes);
/// 15/80/10/10 recipe over non-special ids; random replacements are drawn
/// from the non-reserved vocabulary.
MvlmMask mask_tokens(const std::vector<int>& ids, std::size_t vocab_size, const SamplingConfig& cfg, Rng& rng);

GeoLabelSet make_labels(const Document& doc, const std::vector<int>& token_ids, std::size_t vocab_size,
                        const SamplingConfig& cfg, Rng& rng);
/// Stream seed of the labels used for `doc_index` in `epoch`.
std::uint64_t label_seed(std::uint64_t seed, std::size_t doc_index, std::size_t epoch);
/// Re-derives every label from the geometry functions; throws
/// InvalidInputError on the first disagreement.
void verify_labels(const Document& doc, const GeoLabelSet& labels, const SamplingConfig& cfg);

nlohmann::json labels_to_json(const GeoLabelSet& labels);
GeoLabelSet labels_from_json(const nlohmann::json& j);

struct TaskToggles {
  bool mvlm = true, ddm = true, dde = true, cit = true;
  std::string name() const;  ///< e.g. "mvlm+ddm+dde+cit", "mvlm"
};

/// Per-task loss values of one document (or averages over an epoch).
struct TaskLosses {
  double mvlm = 0, ddm_direction = 0, ddm_nearest = 0, dde = 0, cit = 0;
  double ddm() const { return ddm_direction + ddm_nearest; }
  double total() const { return mvlm + ddm() + dde + cit; }
};

struct PretrainLoss {
  nn::Var total;
  TaskLosses parts;
  bool any_task = false;
};

/// Unweighted sum of the enabled task losses; skipped tasks add 0.
PretrainLoss pretrain_loss(nn::Graph& g, GeoModel& model, const TokenInputs& in, const GeoLabelSet& labels,
                           const TaskToggles& tasks);

struct PretrainConfig {
  TaskToggles tasks;
  SamplingConfig sampling;
  std::size_t epochs = 4;
  std::size_t batch_docs = 4;
  nn::AdamConfig adam{.lr = 1e-3};
  double clip = 1.0;
  std::uint64_t seed = 0;
  /// Check every generated label against the geometry functions.
  bool verify = false;
  /// When non-empty, a non-finite loss writes the offending batch here.
  std::filesystem::path dump_path;
  /// Optional label cache produced by prepare-labels.
  std::function<const GeoLabelSet*(std::size_t doc, std::size_t epoch)> cached;
};

struct PretrainLog {
  std::vector<TaskLosses> epochs;
  std::vector<std::size_t> skipped_dde;  ///< documents without DDE per epoch
};

/// Trains `model` in place on the (already tokenized) documents.
PretrainLog pretrain(GeoModel& model, const std::vector<Document>& docs, const PretrainConfig& cfg,
                     const std::function<void(std::size_t epoch, const TaskLosses&)>& on_epoch = {});

}  // namespace geolab
