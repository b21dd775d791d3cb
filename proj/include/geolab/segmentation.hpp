#pragma once

#include <vector>

#include "geolab/corpus.hpp"
#include "geolab/rng.hpp"

namespace geolab {

/// Split probability for a line of `num_words` words: 1 - 1 / (N_w - 0.5).
double line_split_probability(std::size_t num_words);
/// Poisson rate of the segment count: min(N_w / 3, 7).
double line_split_rate(std::size_t num_words);

struct LineSplit {
  std::vector<TextSegment> parts;
  /// True when the split branch was taken (even if it drew a single part).
  bool split_branch = false;
  /// Segment count after clamping to [1, N_w]; 1 when the line was kept.
  int num_parts = 1;
};

/// Poisson line segmentation of one OCR line. Parts are contiguous runs of
/// words with near-equal counts (earlier parts take the remainder); their
/// boxes are word hulls and they inherit the line's id and label.
LineSplit poisson_line_segmentation(const TextSegment& line, Rng& rng);

struct SegmentationStats {
  std::size_t documents = 0;
  std::size_t documents_resegmented = 0;
  std::size_t lines_split = 0;
};

/// Re-segments each document independently with probability `prob`. Split
/// segments get fresh ids after renumbering; a link touching a split line is
/// carried by that line's first part.
SegmentationStats apply_segmentation(std::vector<Document>& corpus, double prob, Rng& rng);

}  // namespace geolab
