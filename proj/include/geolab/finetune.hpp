#pragma once

#include <functional>
#include <string>
#include <vector>

#include "geolab/metrics.hpp"
#include "geolab/model.hpp"
#include "geolab/nn/optim.hpp"

namespace geolab {

struct FinetuneConfig {
  std::size_t epochs = 30;
  std::size_t batch_docs = 2;
  nn::AdamConfig adam{.lr = 1e-3};
  double clip = 1.0;
  bool variance_loss = true;
  double variance_weight = 1.0;
  /// Without RFE the coarse matrix r0 is the final prediction.
  bool use_rfe = true;
  bool ser = true;
  std::uint64_t seed = 0;
};

/// n x n gold matrix, entry [son][father] = 1 for each link.
nn::Mat gold_relation_matrix(const Document& doc);

struct FinetuneLoss {
  nn::Var total;
  double ser = 0, r0 = 0, r1 = 0, variance = 0;
};

/// CE over SER tags, BCE on off-diagonal r0 and r1 logits, plus the weighted
/// sum over sons with more than one gold father of the population variance of
/// those fathers' final probabilities.
FinetuneLoss finetune_loss(nn::Graph& g, GeoModel& model, const TokenInputs& in, const Document& doc,
                           const FinetuneConfig& cfg);

/// Mean loss per epoch.
std::vector<double> finetune(GeoModel& model, const std::vector<Document>& docs, const FinetuneConfig& cfg,
                             const std::function<void(std::size_t, double)>& on_epoch = {});

/// Son/father pairs (i, j) with r[i][j] > 0.5, excluding the diagonal. With
/// `rsf`, j must also satisfy max_k r[i][k] < r[i][j] + tau.
std::set<nn::IndexPair> decode_rsf(const nn::Mat& r, double tau, bool rsf);
/// Pairs removed by the RSF indicator alone (thresholded minus decoded).
std::set<nn::IndexPair> rsf_removed(const nn::Mat& r, double tau);

LinkSet pairs_to_links(const Document& doc, const std::set<nn::IndexPair>& pairs);

double median_segment_height(const Document& doc);
/// Drops father -> son links whose son centre lies more than `delta` above
/// the father's centre.
LinkSet geometric_constraint_filter(const LinkSet& links, const Document& doc, double delta);

struct DecodeConfig {
  bool rsf = true;
  double tau = 1e-3;
  bool use_rfe = true;
  bool ser = true;
  /// Geometric-constraint filter: Δ = geo_filter_factor x median height;
  /// 0 disables it.
  double geo_filter_factor = 0.0;
};

struct Relations {
  nn::Mat r0, r1;  ///< r1 equals r0 when RFE is off
  std::vector<int> tags;
};

Relations infer(GeoModel& model, const Document& doc, const DecodeConfig& cfg);
DocumentPrediction decode(const Relations& rel, const Document& doc, const DecodeConfig& cfg);
/// Inference over a corpus with up to `jobs` worker threads; output order
/// follows `docs`.
std::vector<DocumentPrediction> predict(GeoModel& model, const std::vector<Document>& docs, const DecodeConfig& cfg,
                                        std::size_t jobs = 1);

struct FewShotPoint {
  std::size_t shots = 0;
  std::string variant;  ///< "pretrained-heads" or "random-heads"
  std::uint64_t seed = 0;
  PRF re;
};

/// For every shot count and seed, fine-tunes a copy of `pretrained` (once
/// with its relation heads, once with them re-drawn) on a random subset of
/// `pool` and evaluates on `test`. Throws InvalidInputError when a shot count
/// exceeds the pool.
std::vector<FewShotPoint> few_shot_harness(const GeoModel& pretrained, const std::vector<Document>& pool,
                                           const std::vector<Document>& test, const std::vector<std::size_t>& shots,
                                           const std::vector<std::uint64_t>& seeds, const FinetuneConfig& ft,
                                           const DecodeConfig& dec);

}  // namespace geolab
