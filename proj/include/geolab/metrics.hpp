#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "geolab/corpus.hpp"

namespace geolab {

/// Micro-averaged counts. Precision is 0 when nothing was predicted.
struct PRF {
  std::size_t tp = 0, npred = 0, ngold = 0;
  double precision() const;
  double recall() const;
  double f1() const;
  PRF& operator+=(const PRF& o);
};

/// 2pr/(p+r), 0 when p+r is 0.
double harmonic_f1(double p, double r);

/// Tag ids: 0 = O, then B-/I- pairs for header, question, answer. Segments
/// labelled "other" are tagged O.
int bio_tag(EntityLabel label, bool begin);
std::string bio_tag_name(int tag);
/// Gold tags of every token in stored segment order (one per token id).
std::vector<int> gold_tags(const Document& doc);

struct Entity {
  std::size_t start = 0, end = 0;  ///< [start, end)
  int type = 0;                    ///< 0 header, 1 question, 2 answer
  friend auto operator<=>(const Entity&, const Entity&) = default;
};

/// Chunks in the conlleval style: an I- tag that does not continue a chunk
/// of its own type opens a new one.
std::vector<Entity> decode_bio(std::span<const int> tags);
PRF entity_prf(std::span<const int> gold, std::span<const int> pred);

using LinkSet = std::set<Link>;  ///< (father_id, son_id)
PRF link_prf(const LinkSet& pred, const LinkSet& gold);

struct DocumentPrediction {
  std::string doc_id;
  LinkSet links;
  std::vector<int> tags;  ///< per token, empty when SER was not run
};

struct ProbeStats {
  double entropy = 0, xent = 0, accuracy = 0;
};

struct MetricsReport {
  PRF re, ser;
  std::optional<ProbeStats> probe;
  std::map<std::string, std::string> meta;
  std::map<std::string, double> extra;

  /// "key = value" lines: meta.*, re.*, ser.*, probe.*, then extra keys.
  std::string to_text() const;
  static MetricsReport from_text(const std::string& text);
};

/// RE link micro scores and SER entity scores. Throws EvaluationError when
/// the document ids do not line up or tag counts disagree.
MetricsReport evaluate(const std::vector<DocumentPrediction>& preds, const std::vector<Document>& gold);

}  // namespace geolab
