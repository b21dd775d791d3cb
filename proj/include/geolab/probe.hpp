#pragma once

#include <vector>

#include "geolab/metrics.hpp"
#include "geolab/model.hpp"

namespace geolab {

struct ProbeConfig {
  std::size_t pairs_per_doc = 64;
  std::size_t steps = 300;
  double lr = 1e-2;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  ProbeStats stats;  ///< on held-out pairs
  double majority = 0;  ///< accuracy of always predicting the most frequent training class
  std::size_t train_pairs = 0, test_pairs = 0;
};

/// Segment features of every document with the encoder frozen.
std::vector<nn::Mat> segment_features(GeoModel& model, const std::vector<Document>& docs);

/// Fits a fresh linear 9-way classifier on [B_i, B_j] of random pairs from
/// `train` (labels from the geometry functions) and scores it on pairs from
/// `test`. The model is only read.
ProbeResult direction_probe(GeoModel& model, const std::vector<Document>& train, const std::vector<Document>& test,
                            const ProbeConfig& cfg);

}  // namespace geolab
