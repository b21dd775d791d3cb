#include <algorithm>
#include <cmath>

#include "geolab/errors.hpp"
#include "geolab/pretrain.hpp"

namespace geolab {

void SamplingConfig::validate() const {
  if (dde_threshold <= 0 || dde_threshold > dde_ratio || dde_ratio > 1)
    throw ConfigError("need 0 < dde_threshold <= dde_ratio <= 1");
  if (dde_positive == 0 || dde_sample == 0) throw ConfigError("DDE set sizes must be positive");
  if (mask_rate < 0 || mask_rate > 1 || mask_token < 0 || mask_random < 0 || mask_token + mask_random > 1)
    throw ConfigError("invalid masking rates");
}

std::vector<DdmPair> sample_ddm(const std::vector<BBox>& boxes, const SamplingConfig& cfg, Rng& rng) {
  const std::size_t n = boxes.size();
  std::vector<DdmPair> out;
  if (n < 2) return out;
  const auto anchors = rng.sample_without_replacement(n, std::min(cfg.ddm_anchors, n));
  for (std::size_t a : anchors) {
    const NearestMap nearest = nearest_in_direction(a, boxes);
    for (std::size_t p : rng.sample_without_replacement(n - 1, std::min(cfg.ddm_partners, n - 1))) {
      const std::size_t partner = p >= a ? p + 1 : p;
      const Direction d = direction(boxes[a], boxes[partner]);
      const bool near = d != Direction::Overlap && nearest[static_cast<std::size_t>(d)] == partner;
      out.push_back({a, partner, static_cast<int>(d), near ? 1 : 0});
    }
  }
  return out;
}

DdeSet build_dde(const std::vector<BBox>& boxes, const SamplingConfig& cfg, Rng& rng) {
  DdeSet out;
  const std::size_t n = boxes.size();
  const std::size_t P = cfg.dde_positive, S = cfg.dde_sample;
  if (n < 2 || n * (n - 1) < P + S) return out;

  std::array<std::vector<nn::IndexPair>, kNumDirections> by_dir;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) by_dir[static_cast<std::size_t>(direction(boxes[i], boxes[j]))].emplace_back(i, j);

  // Dominant compass direction; ties (antiphase directions always tie) are
  // broken at random.
  std::size_t best = 0;
  for (std::size_t d = 0; d < kNumCompass; ++d) best = std::max(best, by_dir[d].size());
  std::vector<std::size_t> winners;
  for (std::size_t d = 0; d < kNumCompass; ++d)
    if (by_dir[d].size() == best) winners.push_back(d);
  const std::size_t dstar = winners[rng.index(winners.size())];

  std::vector<nn::IndexPair> dominant = by_dir[dstar], others;
  for (std::size_t d = 0; d < kNumDirections; ++d)
    if (d != dstar) others.insert(others.end(), by_dir[d].begin(), by_dir[d].end());
  rng.shuffle(dominant);
  rng.shuffle(others);

  const auto want = static_cast<std::size_t>(std::ceil(cfg.dde_ratio * static_cast<double>(P) - 1e-9));
  const auto need = static_cast<std::size_t>(std::ceil(cfg.dde_threshold * static_cast<double>(P) - 1e-9));
  std::size_t kp = std::min(want, dominant.size());
  if (kp < need) return out;
  std::size_t ko = std::min(P - kp, others.size());
  kp = P - ko;  // too few exceptions: top up with dominant pairs
  if (kp > dominant.size()) return out;

  std::size_t di = 0, oi = 0;
  for (; di < kp; ++di) out.positive.push_back(dominant[di]);
  for (; oi < ko; ++oi) out.positive.push_back(others[oi]);
  rng.shuffle(out.positive);

  const std::size_t rem_d = dominant.size() - di, rem_o = others.size() - oi;
  std::size_t sd = std::min(S / 2, rem_d);
  const std::size_t so = std::min(S - sd, rem_o);
  sd = std::min(S - so, rem_d);
  for (std::size_t k = 0; k < sd; ++k) out.sample.push_back({dominant[di + k], 1});
  for (std::size_t k = 0; k < so; ++k) out.sample.push_back({others[oi + k], 0});
  rng.shuffle(out.sample);
  out.dominant = static_cast<int>(dstar);
  out.skipped = false;
  return out;
}

std::vector<Triplet> collinear_triplets(const std::vector<BBox>& boxes) {
  std::vector<Triplet> out;
  const std::size_t n = boxes.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const Direction dij = direction(boxes[i], boxes[j]);
      if (dij == Direction::Overlap) continue;
      for (std::size_t k = j + 1; k < n; ++k)
        if (collinearity(boxes[i], boxes[j], boxes[k]) != CollinearClass::None) out.push_back({i, j, k});
    }
  return out;
}

namespace {

Triplet random_triplet(std::size_t n, Rng& rng) {
  const auto s = rng.sample_without_replacement(n, 3);
  return {s[0], s[1], s[2]};
}

}  // namespace

std::vector<CitTriplet> sample_cit(const std::vector<BBox>& boxes, const SamplingConfig& cfg, Rng& rng) {
  const std::size_t n = boxes.size();
  std::vector<CitTriplet> out;
  if (n < 3) return out;
  std::vector<Triplet> pool;
  if (n <= cfg.cit_exhaustive) {
    pool = collinear_triplets(boxes);
  } else {
    for (std::size_t probe = 0; probe < 256 * cfg.cit_triplets; ++probe) {
      Triplet t = random_triplet(n, rng);
      if (collinearity(boxes[t[0]], boxes[t[1]], boxes[t[2]]) != CollinearClass::None) pool.push_back(t);
    }
  }
  const std::size_t from_pool = pool.empty() ? 0 : cfg.cit_triplets / 2;
  for (std::size_t s = 0; s < cfg.cit_triplets; ++s) {
    Triplet t = s < from_pool ? pool[rng.index(pool.size())] : random_triplet(n, rng);
    // Stored order is random; the class does not depend on it.
    for (std::size_t i = 2; i > 0; --i) std::swap(t[i], t[rng.index(i + 1)]);
    out.push_back({t, static_cast<int>(collinearity(boxes[t[0]], boxes[t[1]], boxes[t[2]]))});
  }
  return out;
}

MvlmMask mask_tokens(const std::vector<int>& ids, std::size_t vocab_size, const SamplingConfig& cfg, Rng& rng) {
  MvlmMask m;
  m.input_ids = ids;
  const auto reserved = static_cast<std::size_t>(Vocabulary::kNumReserved);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < Vocabulary::kNumReserved) continue;
    if (!rng.bernoulli(cfg.mask_rate)) continue;
    m.positions.push_back(t);
    m.original.push_back(ids[t]);
    const double r = rng.uniform();
    if (r < cfg.mask_token) {
      m.input_ids[t] = Vocabulary::kMask;
      ++m.replaced_mask;
    } else if (r < cfg.mask_token + cfg.mask_random && vocab_size > reserved) {
      m.input_ids[t] = static_cast<int>(reserved + rng.index(vocab_size - reserved));
      ++m.replaced_random;
    } else {
      ++m.kept;
    }
  }
  return m;
}

std::uint64_t label_seed(std::uint64_t seed, std::size_t doc_index, std::size_t epoch) {
  return Rng::derive(seed ^ 0x6c61626c65ULL, doc_index, epoch);
}

GeoLabelSet make_labels(const Document& doc, const std::vector<int>& token_ids, std::size_t vocab_size,
                        const SamplingConfig& cfg, Rng& rng) {
  const auto boxes = doc.boxes();
  GeoLabelSet l;
  l.ddm = sample_ddm(boxes, cfg, rng);
  l.dde = build_dde(boxes, cfg, rng);
  l.cit = sample_cit(boxes, cfg, rng);
  l.mvlm = mask_tokens(token_ids, vocab_size, cfg, rng);
  return l;
}

void verify_labels(const Document& doc, const GeoLabelSet& labels, const SamplingConfig& cfg) {
  const auto boxes = doc.boxes();
  auto fail = [&](const std::string& what) { throw InvalidInputError(doc.id + ": " + what + " disagrees with geometry"); };
  for (const DdmPair& p : labels.ddm) {
    const Direction d = direction(boxes[p.anchor], boxes[p.partner]);
    if (static_cast<int>(d) != p.direction) fail("DDM direction label");
    const NearestMap nm = nearest_in_direction(p.anchor, boxes);
    const bool near = d != Direction::Overlap && nm[static_cast<std::size_t>(d)] == p.partner;
    if (near != (p.nearest == 1)) fail("DDM nearest label");
  }
  if (!labels.dde.skipped) {
    std::size_t dom = 0;
    for (const auto& [i, j] : labels.dde.positive)
      if (static_cast<int>(direction(boxes[i], boxes[j])) == labels.dde.dominant) ++dom;
    if (static_cast<double>(dom) < cfg.dde_threshold * static_cast<double>(labels.dde.positive.size()) - 1e-9)
      fail("DDE positive-set dominance");
    for (const DdeSample& s : labels.dde.sample) {
      const bool same = static_cast<int>(direction(boxes[s.pair.first], boxes[s.pair.second])) == labels.dde.dominant;
      if (same != (s.label == 1)) fail("DDE sample label");
    }
  }
  for (const CitTriplet& c : labels.cit)
    if (static_cast<int>(collinearity(boxes[c.t[0]], boxes[c.t[1]], boxes[c.t[2]])) != c.cls) fail("CIT label");
}

nlohmann::json labels_to_json(const GeoLabelSet& l) {
  nlohmann::json j;
  j["ddm"] = nlohmann::json::array();
  for (const auto& p : l.ddm) j["ddm"].push_back({p.anchor, p.partner, p.direction, p.nearest});
  j["dde"] = {{"skipped", l.dde.skipped}, {"dominant", l.dde.dominant}};
  j["dde"]["positive"] = nlohmann::json::array();
  for (const auto& [a, b] : l.dde.positive) j["dde"]["positive"].push_back({a, b});
  j["dde"]["sample"] = nlohmann::json::array();
  for (const auto& s : l.dde.sample) j["dde"]["sample"].push_back({s.pair.first, s.pair.second, s.label});
  j["cit"] = nlohmann::json::array();
  for (const auto& c : l.cit) j["cit"].push_back({c.t[0], c.t[1], c.t[2], c.cls});
  j["mvlm"] = {{"positions", l.mvlm.positions},
               {"original", l.mvlm.original},
               {"input_ids", l.mvlm.input_ids},
               {"counts", {l.mvlm.replaced_mask, l.mvlm.replaced_random, l.mvlm.kept}}};
  return j;
}

GeoLabelSet labels_from_json(const nlohmann::json& j) {
  try {
    GeoLabelSet l;
    for (const auto& p : j.at("ddm"))
      l.ddm.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>(), p.at(2).get<int>(), p.at(3).get<int>()});
    const auto& d = j.at("dde");
    l.dde.skipped = d.at("skipped").get<bool>();
    l.dde.dominant = d.at("dominant").get<int>();
    for (const auto& p : d.at("positive")) l.dde.positive.emplace_back(p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>());
    for (const auto& s : d.at("sample"))
      l.dde.sample.push_back({{s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()}, s.at(2).get<int>()});
    for (const auto& c : j.at("cit"))
      l.cit.push_back({{c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(), c.at(2).get<std::size_t>()}, c.at(3).get<int>()});
    const auto& m = j.at("mvlm");
    l.mvlm.positions = m.at("positions").get<std::vector<std::size_t>>();
    l.mvlm.original = m.at("original").get<std::vector<int>>();
    l.mvlm.input_ids = m.at("input_ids").get<std::vector<int>>();
    const auto& c = m.at("counts");
    l.mvlm.replaced_mask = c.at(0).get<std::size_t>();
    l.mvlm.replaced_random = c.at(1).get<std::size_t>();
    l.mvlm.kept = c.at(2).get<std::size_t>();
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed label cache: ") + e.what());
  }
}

}  // namespace geolab
