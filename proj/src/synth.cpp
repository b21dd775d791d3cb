#include "geolab/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "geolab/errors.hpp"

namespace geolab {

using nlohmann::json;

void GeneratorSpec::validate() const {
  auto fail = [](const std::string& m) { throw GenerationError("generator spec: " + m); };
  if (grid_cols < 1 || grid_rows < 1) fail("grid must have at least one block");
  if (min_pairs < 1 || max_pairs < min_pairs) fail("need 1 <= min_pairs <= max_pairs");
  for (double r : {block_fill_rate, header_rate, vertical_value_rate, multi_father_rate, multi_son_rate, other_rate,
                   colon_rate, pool_overlap})
    if (!(r >= 0.0 && r <= 1.0)) fail("rates must lie in [0, 1]");
  if (multi_father_rate >= 1.0 && min_pairs < 2) fail("multi_father_rate 1 needs min_pairs >= 2");
  if (jitter < 0 || jitter > 4) fail("jitter must lie in [0, 4]");
  if (key_pool < 2 || value_pool < 2 || header_pool < 1) fail("word pools too small");
  if (page_width < 200 || page_height < 200) fail("page too small");
}

json GeneratorSpec::to_json() const {
  return json{{"num_docs", num_docs},
              {"grid_cols", grid_cols},
              {"grid_rows", grid_rows},
              {"min_pairs", min_pairs},
              {"max_pairs", max_pairs},
              {"block_fill_rate", block_fill_rate},
              {"header_rate", header_rate},
              {"vertical_value_rate", vertical_value_rate},
              {"multi_father_rate", multi_father_rate},
              {"multi_son_rate", multi_son_rate},
              {"other_rate", other_rate},
              {"colon_rate", colon_rate},
              {"jitter", jitter},
              {"shuffle_segments", shuffle_segments},
              {"page_width", page_width},
              {"page_height", page_height},
              {"key_pool", key_pool},
              {"value_pool", value_pool},
              {"header_pool", header_pool},
              {"pool_overlap", pool_overlap},
              {"vocab_seed", vocab_seed}};
}

GeneratorSpec GeneratorSpec::from_json(const json& j) {
  GeneratorSpec s;
  auto get = [&](const char* k, auto& field) {
    if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
  };
  get("num_docs", s.num_docs);
  get("grid_cols", s.grid_cols);
  get("grid_rows", s.grid_rows);
  get("min_pairs", s.min_pairs);
  get("max_pairs", s.max_pairs);
  get("block_fill_rate", s.block_fill_rate);
  get("header_rate", s.header_rate);
  get("vertical_value_rate", s.vertical_value_rate);
  get("multi_father_rate", s.multi_father_rate);
  get("multi_son_rate", s.multi_son_rate);
  get("other_rate", s.other_rate);
  get("colon_rate", s.colon_rate);
  get("jitter", s.jitter);
  get("shuffle_segments", s.shuffle_segments);
  get("page_width", s.page_width);
  get("page_height", s.page_height);
  get("key_pool", s.key_pool);
  get("value_pool", s.value_pool);
  get("header_pool", s.header_pool);
  get("pool_overlap", s.pool_overlap);
  get("vocab_seed", s.vocab_seed);
  return s;
}

namespace {

constexpr double kCharWidth = 7.0;
constexpr double kWordGap = 6.0;
constexpr double kLineHeight = 18.0;
constexpr double kRowPitch = 30.0;
constexpr double kMargin = 40.0;
constexpr double kBlockPad = 12.0;

std::string pseudo_word(Rng& rng) {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "st"};
  static const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  const int syllables = rng.between(1, 3);
  std::string w;
  for (int k = 0; k < syllables; ++k) {
    w += onsets[rng.index(std::size(onsets))];
    w += vowels[rng.index(std::size(vowels))];
  }
  if (rng.bernoulli(0.4)) w += onsets[rng.index(std::size(onsets))];
  return w;
}

std::vector<std::string> fresh_words(Rng& rng, std::size_t n, std::set<std::string>& used) {
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w = pseudo_word(rng);
    if (used.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

struct Layout {
  const GeneratorSpec& spec;
  const WordPools& pools;
  Rng& rng;
  Document doc;
  int next_id = 0;

  std::vector<std::string> draw_words(const std::vector<std::string>& pool, int lo, int hi) {
    const int n = rng.between(lo, hi);
    std::vector<std::string> w;
    for (int k = 0; k < n; ++k) w.push_back(pool[rng.index(pool.size())]);
    return w;
  }

  static double text_width(const std::string& s) { return kCharWidth * static_cast<double>(s.size()); }

  // Lays out one or more lines of words starting at (x, y); words that would
  // cross `x_limit` are dropped, keeping at least one per line.
  int emit(EntityLabel label, const std::vector<std::vector<std::string>>& lines, double x, double y,
           double x_limit) {
    TextSegment seg;
    seg.id = next_id++;
    seg.label = label;
    const double jx = spec.jitter > 0 ? rng.uniform(-spec.jitter, spec.jitter) : 0.0;
    const double jy = spec.jitter > 0 ? rng.uniform(-spec.jitter, spec.jitter) : 0.0;
    for (std::size_t li = 0; li < lines.size(); ++li) {
      double cx = x;
      const double ly = y + static_cast<double>(li) * kRowPitch;
      for (std::size_t k = 0; k < lines[li].size(); ++k) {
        const double w = text_width(lines[li][k]);
        if (k > 0 && cx + w > x_limit) break;
        seg.words.push_back({lines[li][k], BBox{cx + jx, ly + jy, cx + jx + w, ly + jy + kLineHeight}});
        cx += w + kWordGap;
      }
    }
    seg.refresh_box();
    doc.segments.push_back(std::move(seg));
    return doc.segments.back().id;
  }

  double right_edge(int id) const {
    for (const auto& s : doc.segments)
      if (s.id == id) return s.box.x2;
    return 0;
  }

  std::vector<std::string> key_words() {
    auto w = draw_words(pools.keys, 1, 2);
    if (rng.bernoulli(spec.colon_rate)) w.back() += ":";
    return w;
  }

  void block(double bx, double by, double bw, double bh) {
    const double x_limit = bx + bw - kBlockPad;
    const double y_limit = by + bh - kBlockPad;
    double x0 = bx + kBlockPad + rng.uniform(0.0, 0.15 * bw);
    double y = by + kBlockPad + rng.uniform(0.0, 20.0);
    std::vector<int> header_ids;
    if (rng.bernoulli(spec.header_rate)) {
      header_ids.push_back(emit(EntityLabel::Header, {draw_words(pools.headers, 1, 3)}, x0, y, x_limit));
      y += kRowPitch + 4;
      if (rng.bernoulli(spec.multi_father_rate)) {
        header_ids.push_back(emit(EntityLabel::Header, {draw_words(pools.headers, 1, 2)}, x0 + 10, y, x_limit));
        y += kRowPitch + 4;
      }
    }
    const int num_keys = rng.between(spec.min_pairs, spec.max_pairs);
    // Keys first so the value column can align past the widest key.
    std::vector<std::vector<std::string>> keys;
    double key_col = 0;
    for (int k = 0; k < num_keys; ++k) {
      keys.push_back(key_words());
      double w = 0;
      for (const auto& s : keys.back()) w += text_width(s) + kWordGap;
      key_col = std::max(key_col, w);
    }
    const double value_x = x0 + key_col + rng.uniform(12.0, 40.0);
    if (value_x + 40 > x_limit) throw GenerationError("block too narrow for its key column");

    int k = 0;
    while (k < num_keys) {
      const int remaining = num_keys - k;
      int group = 1;
      if (remaining >= 2 && rng.bernoulli(spec.multi_father_rate)) group = remaining == 3 ? 3 : 2;
      const bool vertical = group == 1 && rng.bernoulli(spec.vertical_value_rate);
      const double rows_needed = vertical ? 2 : group;
      if (y + rows_needed * kRowPitch > y_limit) throw GenerationError("layout does not fit the page: too many rows in block");

      std::vector<int> key_ids;
      for (int g = 0; g < group; ++g)
        key_ids.push_back(emit(EntityLabel::Question, {keys[static_cast<std::size_t>(k + g)]}, x0,
                               y + g * kRowPitch, x_limit));
      for (int kid : key_ids)
        for (int h : header_ids) doc.links.emplace(h, kid);

      if (vertical) {
        const int v = emit(EntityLabel::Answer, {draw_words(pools.values, 1, 3)}, x0 + rng.uniform(0.0, 12.0),
                           y + kRowPitch, x_limit);
        doc.links.emplace(key_ids[0], v);
      } else if (group == 1) {
        const int v = emit(EntityLabel::Answer, {draw_words(pools.values, 1, 3)}, value_x, y, x_limit);
        doc.links.emplace(key_ids[0], v);
        if (rng.bernoulli(spec.multi_son_rate)) {
          const double x2 = right_edge(v) + 18 + spec.jitter * 2;
          if (x2 + 30 < x_limit) {
            const int v2 = emit(EntityLabel::Answer, {draw_words(pools.values, 1, 1)}, x2, y, x_limit);
            doc.links.emplace(key_ids[0], v2);
          }
        }
      } else {
        std::vector<std::vector<std::string>> lines;
        for (int g = 0; g < group; ++g) lines.push_back(draw_words(pools.values, 1, 2));
        const int v = emit(EntityLabel::Answer, lines, value_x, y, x_limit);
        for (int kid : key_ids) doc.links.emplace(kid, v);
      }
      y += rows_needed * kRowPitch;
      k += group;
    }
  }
};

}  // namespace

WordPools make_word_pools(const GeneratorSpec& spec) {
  Rng rng(spec.vocab_seed);
  std::set<std::string> used;
  WordPools p;
  const auto shared_n = static_cast<std::size_t>(spec.pool_overlap * static_cast<double>(std::min(spec.key_pool, spec.value_pool)));
  std::vector<std::string> shared = fresh_words(rng, shared_n, used);
  p.keys = shared;
  p.values = shared;
  for (auto& w : fresh_words(rng, spec.key_pool - shared_n, used)) p.keys.push_back(w);
  for (auto& w : fresh_words(rng, spec.value_pool - shared_n, used)) p.values.push_back(w);
  // Headers reuse part of the key pool.
  const std::size_t header_shared = std::min(spec.header_pool / 2, p.keys.size());
  for (std::size_t i = 0; i < header_shared; ++i) p.headers.push_back(p.keys[i]);
  for (auto& w : fresh_words(rng, spec.header_pool - header_shared, used)) p.headers.push_back(w);
  for (int i = 1; i <= 20; ++i) p.others.push_back(std::to_string(i * 7 % 100));
  return p;
}

Vocabulary synthetic_vocabulary(const GeneratorSpec& spec) {
  const WordPools p = make_word_pools(spec);
  Vocabulary v;
  for (const auto& w : p.keys) {
    v.add(w);
    v.add(w + ":");
  }
  for (const auto& w : p.values) v.add(w);
  for (const auto& w : p.headers) v.add(w);
  for (const auto& w : p.others) v.add(w);
  return v;
}

Document generate_document(const GeneratorSpec& spec, std::uint64_t seed, const std::string& id) {
  spec.validate();
  static thread_local WordPools cached_pools;
  static thread_local std::string cached_key;
  const std::string key = spec.to_json().dump();
  if (key != cached_key) {
    cached_pools = make_word_pools(spec);
    cached_key = key;
  }
  Rng rng(seed);
  Layout lay{spec, cached_pools, rng, {}, 0};
  lay.doc.id = id;
  lay.doc.page_width = spec.page_width;
  lay.doc.page_height = spec.page_height;

  const double usable_w = spec.page_width - 2 * kMargin;
  const double usable_h = spec.page_height - 2 * kMargin - 40;  // footer band
  const double bw = usable_w / spec.grid_cols;
  const double bh = usable_h / spec.grid_rows;
  bool any = false;
  for (int r = 0; r < spec.grid_rows; ++r)
    for (int c = 0; c < spec.grid_cols; ++c) {
      const bool last = r == spec.grid_rows - 1 && c == spec.grid_cols - 1;
      if (!rng.bernoulli(spec.block_fill_rate) && !(last && !any)) continue;
      any = true;
      lay.block(kMargin + c * bw, kMargin + r * bh, bw, bh);
    }
  const double footer_y = spec.page_height - kMargin - 25;
  for (int k = 0; k < 2; ++k) {
    if (!rng.bernoulli(spec.other_rate)) continue;
    const double x = kMargin + (k == 0 ? rng.uniform(0.0, 0.3) : rng.uniform(0.55, 0.8)) * usable_w;
    lay.emit(EntityLabel::Other, {lay.draw_words(cached_pools.others, 1, 2)}, x, footer_y, spec.page_width - kMargin);
  }

  Document doc = std::move(lay.doc);
  if (spec.shuffle_segments) {
    rng.shuffle(doc.segments);
    renumber(doc);
  }
  if (doc.segments.size() > kMaxSegments) throw GenerationError("layout produced more than 256 segments");
  validate_document(doc);
  return doc;
}

std::vector<Document> generate_synthetic_corpus(const GeneratorSpec& spec, Rng& rng, const std::string& prefix) {
  spec.validate();
  const std::uint64_t master = rng.next_u64();
  std::vector<Document> docs;
  docs.reserve(spec.num_docs);
  for (std::size_t i = 0; i < spec.num_docs; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    docs.push_back(generate_document(spec, Rng::derive(master, i), prefix + buf));
  }
  return docs;
}

}  // namespace geolab
