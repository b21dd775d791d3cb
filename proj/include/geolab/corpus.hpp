#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "geolab/geometry.hpp"

namespace geolab {

inline constexpr std::size_t kMaxSegments = 256;

enum class EntityLabel : std::uint8_t { Header = 0, Question, Answer, Other };

std::string_view to_string(EntityLabel label);
/// Accepts "header", "question", "answer", "other" (case-insensitive).
EntityLabel parse_entity_label(std::string_view s);

struct Word {
  std::string text;
  BBox box;
  friend bool operator==(const Word&, const Word&) = default;
};

struct TextSegment {
  int id = 0;
  std::vector<Word> words;
  BBox box;
  EntityLabel label = EntityLabel::Other;
  std::vector<int> token_ids;

  std::string text() const;
  /// Recomputes `box` as the hull of the word boxes.
  void refresh_box();
  friend bool operator==(const TextSegment&, const TextSegment&) = default;
};

/// Directed link father -> son, stored as (father_id, son_id).
using Link = std::pair<int, int>;

struct Document {
  std::string id;
  std::vector<TextSegment> segments;
  std::set<Link> links;
  double page_width = 1000.0;
  double page_height = 1000.0;

  /// Position of the segment with the given id, or -1.
  int index_of(int segment_id) const;
  /// Links re-expressed as (father_index, son_index).
  std::vector<std::pair<std::size_t, std::size_t>> links_by_index() const;
  std::vector<BBox> boxes() const;
  std::size_t token_count() const;
  friend bool operator==(const Document&, const Document&) = default;
};

/// Throws InvalidInputError describing the first violated document
/// invariant (unique ids, valid boxes, hull contains words, non-empty
/// words, link endpoints exist, no self links, at most 256 segments).
void validate_document(const Document& doc);

/// Keeps the first `max_segments` segments in reading order (top-to-bottom,
/// then left-to-right), preserving the original relative order, and drops
/// links that touch removed segments. Returns the number removed.
std::size_t truncate_segments(Document& doc, std::size_t max_segments = kMaxSegments);

/// Drops trailing segments (in stored order) so that the document's token
/// count, plus one [CLS] slot, fits in `max_tokens`. Returns the number removed.
std::size_t truncate_tokens(Document& doc, std::size_t max_tokens);

/// Renumbers segment ids to 0..n-1 in stored order, remapping links.
void renumber(Document& doc);

/// Word-level vocabulary with reserved special tokens at fixed ids.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kMask = 3;
  static constexpr int kNumReserved = 4;

  Vocabulary();

  int add(const std::string& token);
  /// Id of the token, or kUnk.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  bool is_special(int id) const { return id < kNumReserved; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Vocabulary over all words of the given documents, in first-seen order.
  static Vocabulary build(const std::vector<Document>& docs);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

/// Fills every segment's token_ids (one token per word; unknown words map to
/// [UNK]).
void tokenize(Document& doc, const Vocabulary& vocab);
void tokenize(std::vector<Document>& docs, const Vocabulary& vocab);

}  // namespace geolab
