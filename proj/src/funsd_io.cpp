#include "geolab/funsd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "geolab/errors.hpp"

namespace geolab {

using nlohmann::json;

namespace {

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key, "missing field");
  return *it;
}

BBox parse_box(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 4) throw ParseError(path, "expected [x1, y1, x2, y2]");
  double v[4];
  for (std::size_t k = 0; k < 4; ++k) {
    if (!j[k].is_number()) throw ParseError(path, "coordinate " + std::to_string(k) + " is not a number");
    v[k] = j[k].get<double>();
    if (!std::isfinite(v[k]) || v[k] < 0) throw ParseError(path, "coordinate " + std::to_string(k) + " out of range");
  }
  if (v[2] < v[0] || v[3] < v[1]) throw ParseError(path, "inverted box");
  return {v[0], v[1], v[2], v[3]};
}

// Scanned annotations occasionally carry zero-width word boxes.
BBox repair(BBox b) {
  if (b.x2 <= b.x1) b.x2 = b.x1 + 1;
  if (b.y2 <= b.y1) b.y2 = b.y1 + 1;
  return b;
}

void warn(const LoadOptions& opts, const std::string& msg) {
  if (opts.warn) opts.warn(msg);
}

}  // namespace

Document parse_funsd(const json& root, const std::string& doc_id, const LoadOptions& opts) {
  if (!root.is_object()) throw ParseError("$", "top level must be an object");
  const json& form = require(root, "form", "$");
  if (!form.is_array()) throw ParseError("form", "expected an array");

  Document doc;
  doc.id = doc_id;
  std::set<Link> raw_links;
  std::set<int> seen_ids;
  double max_x = 0, max_y = 0;

  for (std::size_t i = 0; i < form.size(); ++i) {
    const std::string path = "form[" + std::to_string(i) + "]";
    const json& rec = form[i];
    if (!rec.is_object()) throw ParseError(path, "expected an object");
    const json& jid = require(rec, "id", path);
    if (!jid.is_number_integer()) throw ParseError(path + ".id", "expected an integer");
    const json& jtext = require(rec, "text", path);
    if (!jtext.is_string()) throw ParseError(path + ".text", "expected a string");
    const json& jlabel = require(rec, "label", path);
    if (!jlabel.is_string()) throw ParseError(path + ".label", "expected a string");
    const json& jwords = require(rec, "words", path);
    if (!jwords.is_array()) throw ParseError(path + ".words", "expected an array");
    const json& jlinking = require(rec, "linking", path);
    if (!jlinking.is_array()) throw ParseError(path + ".linking", "expected an array");
    BBox seg_box{};
    if (rec.contains("box")) seg_box = parse_box(rec["box"], path + ".box");

    TextSegment seg;
    seg.id = jid.get<int>();
    if (!seen_ids.insert(seg.id).second) throw ParseError(path + ".id", "duplicate id " + std::to_string(seg.id));
    try {
      seg.label = parse_entity_label(jlabel.get<std::string>());
    } catch (const InvalidInputError& e) {
      throw ParseError(path + ".label", e.what());
    }
    for (std::size_t w = 0; w < jwords.size(); ++w) {
      const std::string wpath = path + ".words[" + std::to_string(w) + "]";
      const json& jw = jwords[w];
      const json& wt = require(jw, "text", wpath);
      if (!wt.is_string()) throw ParseError(wpath + ".text", "expected a string");
      BBox wb = repair(parse_box(require(jw, "box", wpath), wpath + ".box"));
      std::string text = wt.get<std::string>();
      if (text.empty()) continue;
      seg.words.push_back({std::move(text), wb});
    }
    for (std::size_t l = 0; l < jlinking.size(); ++l) {
      const json& pair = jlinking[l];
      const std::string lpath = path + ".linking[" + std::to_string(l) + "]";
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_number_integer())
        throw ParseError(lpath, "expected [int, int]");
      int a = pair[0].get<int>(), b = pair[1].get<int>();
      if (opts.link_order == LinkOrder::SonFather) std::swap(a, b);
      raw_links.emplace(a, b);
    }
    if (seg.words.empty()) {
      const std::string text = jtext.get<std::string>();
      if (text.empty() || !rec.contains("box")) {
        warn(opts, doc_id + ": skipping " + path + " (no words)");
        continue;
      }
      seg.words.push_back({text, repair(seg_box)});
    }
    seg.refresh_box();
    max_x = std::max(max_x, seg.box.x2);
    max_y = std::max(max_y, seg.box.y2);
    doc.segments.push_back(std::move(seg));
  }

  std::set<int> ids;
  for (const auto& s : doc.segments) ids.insert(s.id);
  for (const auto& l : raw_links) {
    if (l.first == l.second || !ids.count(l.first) || !ids.count(l.second)) {
      warn(opts, doc_id + ": dropping link " + std::to_string(l.first) + "->" + std::to_string(l.second));
      continue;
    }
    doc.links.insert(l);
  }

  doc.page_width = std::max(1.0, std::ceil(max_x));
  doc.page_height = std::max(1.0, std::ceil(max_y));
  if (root.contains("meta") && root["meta"].is_object() && root["meta"].contains("page")) {
    const json& page = root["meta"]["page"];
    if (!page.is_array() || page.size() != 2 || !page[0].is_number() || !page[1].is_number())
      throw ParseError("meta.page", "expected [width, height]");
    doc.page_width = page[0].get<double>();
    doc.page_height = page[1].get<double>();
    if (!(doc.page_width > 0) || !(doc.page_height > 0)) throw ParseError("meta.page", "page size must be positive");
  }

  if (doc.segments.size() > kMaxSegments) {
    const std::size_t dropped = truncate_segments(doc, kMaxSegments);
    warn(opts, doc_id + ": truncated " + std::to_string(dropped) + " segments beyond the 256 limit");
  }
  return doc;
}

Document parse_funsd_text(std::string_view text, const std::string& doc_id, const LoadOptions& opts) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_funsd(root, doc_id, opts);
}

Document load_funsd(const std::filesystem::path& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_funsd_text(ss.str(), path.stem().string(), opts);
}

json to_funsd_json(const Document& doc, const json& meta) {
  std::map<int, std::vector<Link>> by_segment;
  for (const auto& l : doc.links) {
    by_segment[l.first].push_back(l);
    by_segment[l.second].push_back(l);
  }
  json form = json::array();
  for (const auto& s : doc.segments) {
    json rec;
    rec["id"] = s.id;
    rec["text"] = s.text();
    rec["box"] = {s.box.x1, s.box.y1, s.box.x2, s.box.y2};
    rec["label"] = std::string(to_string(s.label));
    json words = json::array();
    for (const auto& w : s.words) words.push_back({{"text", w.text}, {"box", {w.box.x1, w.box.y1, w.box.x2, w.box.y2}}});
    rec["words"] = std::move(words);
    json linking = json::array();
    if (auto it = by_segment.find(s.id); it != by_segment.end())
      for (const auto& l : it->second) linking.push_back({l.first, l.second});
    rec["linking"] = std::move(linking);
    form.push_back(std::move(rec));
  }
  json m = meta.is_object() ? meta : json::object();
  m["page"] = {doc.page_width, doc.page_height};
  return json{{"form", std::move(form)}, {"meta", std::move(m)}};
}

void save_document(const std::filesystem::path& path, const Document& doc, const json& meta) {
  json j = to_funsd_json(doc, meta);
  j["meta"]["document_id"] = doc.id;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

Document load_document(const std::filesystem::path& path, json* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("$", path.string() + ": invalid JSON: " + e.what());
  }
  std::string id = path.stem().string();
  if (root.contains("meta") && root["meta"].contains("document_id")) id = root["meta"]["document_id"].get<std::string>();
  Document doc = parse_funsd(root, id);
  if (meta) *meta = root.value("meta", json::object());
  return doc;
}

json vocabulary_to_json(const Vocabulary& v) { return json(v.tokens()); }

Vocabulary vocabulary_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("vocabulary", "expected an array of tokens");
  Vocabulary v;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) throw ParseError("vocabulary[" + std::to_string(i) + "]", "expected a string");
    const std::string tok = j[i].get<std::string>();
    if (i < Vocabulary::kNumReserved) {
      if (v.token(static_cast<int>(i)) != tok) throw ParseError("vocabulary[" + std::to_string(i) + "]", "reserved token mismatch");
      continue;
    }
    if (v.add(tok) != static_cast<int>(i)) throw ParseError("vocabulary[" + std::to_string(i) + "]", "duplicate token");
  }
  return v;
}

}  // namespace geolab
