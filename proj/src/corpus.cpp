#include "geolab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

#include "geolab/errors.hpp"

namespace geolab {

std::string_view to_string(EntityLabel label) {
  switch (label) {
    case EntityLabel::Header: return "header";
    case EntityLabel::Question: return "question";
    case EntityLabel::Answer: return "answer";
    case EntityLabel::Other: return "other";
  }
  return "other";
}

EntityLabel parse_entity_label(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "header") return EntityLabel::Header;
  if (lower == "question") return EntityLabel::Question;
  if (lower == "answer") return EntityLabel::Answer;
  if (lower == "other") return EntityLabel::Other;
  throw InvalidInputError("unknown entity label '" + std::string(s) + "'");
}

std::string TextSegment::text() const {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w.text;
  }
  return out;
}

void TextSegment::refresh_box() {
  if (words.empty()) return;
  box = words.front().box;
  for (const auto& w : words) box = hull(box, w.box);
}

int Document::index_of(int segment_id) const {
  for (std::size_t i = 0; i < segments.size(); ++i)
    if (segments[i].id == segment_id) return static_cast<int>(i);
  return -1;
}

std::vector<std::pair<std::size_t, std::size_t>> Document::links_by_index() const {
  std::map<int, std::size_t> pos;
  for (std::size_t i = 0; i < segments.size(); ++i) pos[segments[i].id] = i;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(links.size());
  for (const auto& [f, s] : links) out.emplace_back(pos.at(f), pos.at(s));
  return out;
}

std::vector<BBox> Document::boxes() const {
  std::vector<BBox> out;
  out.reserve(segments.size());
  for (const auto& s : segments) out.push_back(s.box);
  return out;
}

std::size_t Document::token_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += s.words.size();
  return n;
}

void validate_document(const Document& doc) {
  auto fail = [&](const std::string& what) { throw InvalidInputError("document '" + doc.id + "': " + what); };
  if (doc.segments.size() > kMaxSegments) fail("more than 256 segments");
  std::set<int> ids;
  for (const auto& s : doc.segments) {
    if (!ids.insert(s.id).second) fail("duplicate segment id " + std::to_string(s.id));
    if (s.words.empty()) fail("segment " + std::to_string(s.id) + " has no words");
    if (!is_valid(s.box)) fail("segment " + std::to_string(s.id) + " has an invalid box");
    for (const auto& w : s.words) {
      if (w.text.empty()) fail("segment " + std::to_string(s.id) + " has an empty word");
      if (!is_valid(w.box)) fail("segment " + std::to_string(s.id) + " has an invalid word box");
      if (!s.box.contains(w.box)) fail("segment " + std::to_string(s.id) + " box does not contain its words");
    }
    if (!s.token_ids.empty() && s.token_ids.size() != s.words.size())
      fail("segment " + std::to_string(s.id) + " token count differs from word count");
  }
  for (const auto& [f, son] : doc.links) {
    if (f == son) fail("self link on segment " + std::to_string(f));
    if (!ids.count(f) || !ids.count(son))
      fail("link " + std::to_string(f) + "->" + std::to_string(son) + " references a missing segment");
  }
}

namespace {

void keep_segments(Document& doc, const std::vector<bool>& keep) {
  std::vector<TextSegment> kept;
  std::set<int> kept_ids;
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    if (keep[i]) {
      kept_ids.insert(doc.segments[i].id);
      kept.push_back(std::move(doc.segments[i]));
    }
  }
  doc.segments = std::move(kept);
  std::erase_if(doc.links, [&](const Link& l) { return !kept_ids.count(l.first) || !kept_ids.count(l.second); });
}

}  // namespace

std::size_t truncate_segments(Document& doc, std::size_t max_segments) {
  const std::size_t n = doc.segments.size();
  if (n <= max_segments) return 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ba = doc.segments[a].box;
    const auto& bb = doc.segments[b].box;
    if (ba.y1 != bb.y1) return ba.y1 < bb.y1;
    return ba.x1 < bb.x1;
  });
  std::vector<bool> keep(n, false);
  for (std::size_t k = 0; k < max_segments; ++k) keep[order[k]] = true;
  keep_segments(doc, keep);
  return n - max_segments;
}

std::size_t truncate_tokens(Document& doc, std::size_t max_tokens) {
  std::size_t used = 1;  // [CLS]
  std::vector<bool> keep(doc.segments.size(), false);
  std::size_t removed = 0;
  bool full = false;
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    const std::size_t need = doc.segments[i].words.size();
    if (!full && used + need <= max_tokens) {
      used += need;
      keep[i] = true;
    } else {
      full = true;
      ++removed;
    }
  }
  if (removed) keep_segments(doc, keep);
  return removed;
}

void renumber(Document& doc) {
  std::map<int, int> remap;
  for (std::size_t i = 0; i < doc.segments.size(); ++i) {
    remap[doc.segments[i].id] = static_cast<int>(i);
    doc.segments[i].id = static_cast<int>(i);
  }
  std::set<Link> links;
  for (const auto& [f, s] : doc.links) links.emplace(remap.at(f), remap.at(s));
  doc.links = std::move(links);
}

Vocabulary::Vocabulary() {
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[MASK]"}) add(t);
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw InvalidInputError("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

Vocabulary Vocabulary::build(const std::vector<Document>& docs) {
  Vocabulary v;
  for (const auto& d : docs)
    for (const auto& s : d.segments)
      for (const auto& w : s.words) v.add(w.text);
  return v;
}

void tokenize(Document& doc, const Vocabulary& vocab) {
  for (auto& s : doc.segments) {
    s.token_ids.clear();
    for (const auto& w : s.words) s.token_ids.push_back(vocab.id(w.text));
  }
}

void tokenize(std::vector<Document>& docs, const Vocabulary& vocab) {
  for (auto& d : docs) tokenize(d, vocab);
}

}  // namespace geolab
