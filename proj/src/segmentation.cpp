#include "geolab/segmentation.hpp"

#include <algorithm>
#include <map>

namespace geolab {

double line_split_probability(std::size_t num_words) {
  if (num_words < 2) return 0.0;
  return 1.0 - 1.0 / (static_cast<double>(num_words) - 0.5);
}

double line_split_rate(std::size_t num_words) { return std::min(static_cast<double>(num_words) / 3.0, 7.0); }

LineSplit poisson_line_segmentation(const TextSegment& line, Rng& rng) {
  LineSplit out;
  const std::size_t nw = line.words.size();
  if (nw < 2) {
    out.parts.push_back(line);
    return out;
  }
  // Alg. guard: keep the line when rand() > p_l.
  if (rng.uniform() > line_split_probability(nw)) {
    out.parts.push_back(line);
    return out;
  }
  out.split_branch = true;
  int ns = rng.poisson(line_split_rate(nw));
  ns = std::clamp(ns, 1, static_cast<int>(nw));
  out.num_parts = ns;
  const std::size_t base = nw / static_cast<std::size_t>(ns);
  const std::size_t extra = nw % static_cast<std::size_t>(ns);
  std::size_t cursor = 0;
  for (int k = 0; k < ns; ++k) {
    const std::size_t count = base + (static_cast<std::size_t>(k) < extra ? 1 : 0);
    TextSegment part;
    part.id = line.id;
    part.label = line.label;
    part.words.assign(line.words.begin() + static_cast<std::ptrdiff_t>(cursor),
                      line.words.begin() + static_cast<std::ptrdiff_t>(cursor + count));
    if (!line.token_ids.empty())
      part.token_ids.assign(line.token_ids.begin() + static_cast<std::ptrdiff_t>(cursor),
                            line.token_ids.begin() + static_cast<std::ptrdiff_t>(cursor + count));
    part.refresh_box();
    out.parts.push_back(std::move(part));
    cursor += count;
  }
  return out;
}

SegmentationStats apply_segmentation(std::vector<Document>& corpus, double prob, Rng& rng) {
  SegmentationStats stats;
  for (auto& doc : corpus) {
    ++stats.documents;
    if (!rng.bernoulli(prob)) continue;
    ++stats.documents_resegmented;
    std::vector<TextSegment> segments;
    std::map<int, int> first_part;  // old id -> new id
    int next_id = 0;
    bool changed = false;
    for (const auto& seg : doc.segments) {
      LineSplit split = poisson_line_segmentation(seg, rng);
      if (split.num_parts > 1) {
        ++stats.lines_split;
        changed = true;
      }
      first_part[seg.id] = next_id;
      for (auto& p : split.parts) {
        p.id = next_id++;
        segments.push_back(std::move(p));
      }
    }
    if (!changed) continue;
    std::set<Link> links;
    for (const auto& [f, s] : doc.links) links.emplace(first_part.at(f), first_part.at(s));
    doc.segments = std::move(segments);
    doc.links = std::move(links);
    if (doc.segments.size() > kMaxSegments) truncate_segments(doc, kMaxSegments);
  }
  return stats;
}

}  // namespace geolab
