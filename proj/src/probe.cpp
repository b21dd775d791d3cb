#include "geolab/probe.hpp"

#include <cmath>

#include "geolab/errors.hpp"
#include "geolab/nn/optim.hpp"

namespace geolab {

using namespace nn;

std::vector<Mat> segment_features(GeoModel& model, const std::vector<Document>& docs) {
  std::vector<Mat> out;
  out.reserve(docs.size());
  for (const Document& d : docs) {
    Graph g;
    const TokenInputs in = build_token_inputs(d, model.config().encoder);
    out.push_back(model.encoder().encode(g, model.store(), in).segments.value());
  }
  return out;
}

namespace {

struct PairSet {
  Mat x;
  std::vector<int> y;
};

PairSet sample_pairs(GeoModel& model, const std::vector<Document>& docs, std::size_t per_doc, Rng& rng) {
  const auto feats = segment_features(model, docs);
  const auto d = static_cast<Eigen::Index>(model.config().encoder.hidden);
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> picks;
  for (std::size_t k = 0; k < docs.size(); ++k) {
    const std::size_t n = docs[k].segments.size();
    if (n < 2) continue;
    for (std::size_t p = 0; p < per_doc; ++p) {
      const std::size_t i = rng.index(n);
      std::size_t j = rng.index(n - 1);
      if (j >= i) ++j;
      picks.emplace_back(k, i, j);
    }
  }
  PairSet s;
  s.x.resize(static_cast<Eigen::Index>(picks.size()), 2 * d);
  for (std::size_t r = 0; r < picks.size(); ++r) {
    const auto [k, i, j] = picks[r];
    const auto row = static_cast<Eigen::Index>(r);
    s.x.row(row).head(d) = feats[k].row(static_cast<Eigen::Index>(i));
    s.x.row(row).tail(d) = feats[k].row(static_cast<Eigen::Index>(j));
    s.y.push_back(static_cast<int>(direction(docs[k].segments[i].box, docs[k].segments[j].box)));
  }
  return s;
}

}  // namespace

ProbeResult direction_probe(GeoModel& model, const std::vector<Document>& train, const std::vector<Document>& test,
                            const ProbeConfig& cfg) {
  Rng rng(Rng::derive(cfg.seed, 0x70726f6265ULL));
  const PairSet tr = sample_pairs(model, train, cfg.pairs_per_doc, rng);
  const PairSet te = sample_pairs(model, test, cfg.pairs_per_doc, rng);
  if (tr.y.empty() || te.y.empty()) throw InvalidInputError("direction probe needs documents with at least 2 segments");

  ParameterStore probe;
  const auto in = static_cast<std::size_t>(tr.x.cols());
  probe.add("probe.W", in, kNumDirections, Init::Zeros, rng);
  probe.add("probe.b", 0, kNumDirections, Init::Zeros, rng);
  AdamConfig adam{.lr = cfg.lr, .weight_decay = cfg.weight_decay};
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    probe.zero_grad();
    Graph g;
    Var loss = cross_entropy(affine(g.constant(tr.x), g.param(probe.at("probe.W")), g.param(probe.at("probe.b"))), tr.y);
    if (!std::isfinite(loss.item())) throw NumericError("direction probe diverged");
    g.backward(loss);
    adam_step(probe, adam);
  }

  ProbeResult r;
  r.train_pairs = tr.y.size();
  r.test_pairs = te.y.size();
  Mat logits = te.x * probe.at("probe.W").value;
  logits.rowwise() += probe.at("probe.b").value.row(0);
  std::array<std::size_t, kNumDirections> freq{};
  for (int y : tr.y) ++freq[static_cast<std::size_t>(y)];
  const auto majority = static_cast<int>(std::max_element(freq.begin(), freq.end()) - freq.begin());
  double ent = 0, xent = 0;
  std::size_t correct = 0, maj = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    Eigen::RowVectorXd p = (logits.row(i).array() - mx).exp();
    p /= p.sum();
    for (Eigen::Index c = 0; c < p.size(); ++c)
      if (p(c) > 0) ent -= p(c) * std::log(p(c));
    const int y = te.y[static_cast<std::size_t>(i)];
    xent -= std::log(std::max(p(y), 1e-300));
    Eigen::Index best;
    p.maxCoeff(&best);
    correct += best == y;
    maj += y == majority;
  }
  const double m = static_cast<double>(logits.rows());
  r.stats = {ent / m, xent / m, static_cast<double>(correct) / m};
  r.majority = static_cast<double>(maj) / m;
  return r;
}

}  // namespace geolab
