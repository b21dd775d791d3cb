#include "geolab/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "geolab/errors.hpp"

namespace geolab {

using namespace nn;

Mat gold_relation_matrix(const Document& doc) {
  const auto n = static_cast<Eigen::Index>(doc.segments.size());
  Mat y = Mat::Zero(n, n);
  for (const auto& [f, s] : doc.links_by_index()) y(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(f)) = 1;
  return y;
}

FinetuneLoss finetune_loss(Graph& g, GeoModel& model, const TokenInputs& in, const Document& doc,
                           const FinetuneConfig& cfg) {
  ParameterStore& store = model.store();
  const Heads& heads = model.heads();
  const EncodedDocument enc = model.encoder().encode(g, store, in);
  const auto n = static_cast<Eigen::Index>(doc.segments.size());
  FinetuneLoss out;
  std::vector<Var> terms;

  if (cfg.ser && in.real_tokens > 1) {
    std::vector<std::size_t> rows;
    for (std::size_t t = 1; t < in.real_tokens; ++t) rows.push_back(t);
    Var l = cross_entropy(heads.ser_logits(g, store, gather_rows(enc.tokens, rows)), gold_tags(doc));
    out.ser = l.item();
    terms.push_back(l);
  }
  if (n >= 2) {
    const Mat y = gold_relation_matrix(doc);
    const Mat off = Mat::Ones(n, n) - Mat::Identity(n, n);
    Var r0 = heads.crp_logits(g, store, enc.segments);
    Var l0 = bce_with_logits(r0, y, off);
    out.r0 = l0.item();
    terms.push_back(l0);
    Var final_logits = r0;
    if (cfg.use_rfe) {
      const Mat p0 = (1.0 / (1.0 + (-r0.value().array()).exp())).matrix();
      RefinedRelations rr = heads.refine(g, store, enc.segments, p0);
      Var l1 = bce_with_logits(rr.logits, y, off);
      out.r1 = l1.item();
      terms.push_back(l1);
      final_logits = rr.logits;
    }
    if (cfg.variance_loss && cfg.variance_weight > 0) {
      std::vector<Var> vars;
      for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<IndexPair> fathers;
        for (Eigen::Index j = 0; j < n; ++j)
          if (y(i, j) > 0) fathers.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        if (fathers.size() > 1) vars.push_back(population_variance(sigmoid(gather_elements(final_logits, fathers))));
      }
      if (!vars.empty()) {
        Var v = scale(add_scalars(vars), cfg.variance_weight);
        out.variance = v.item();
        terms.push_back(v);
      }
    }
  }
  out.total = terms.empty() ? g.constant(Mat::Zero(1, 1)) : add_scalars(terms);
  return out;
}

std::vector<double> finetune(GeoModel& model, const std::vector<Document>& docs, const FinetuneConfig& cfg,
                             const std::function<void(std::size_t, double)>& on_epoch) {
  if (docs.empty()) throw InvalidInputError("fine-tuning set is empty");
  if (cfg.batch_docs == 0) throw ConfigError("batch_docs must be positive");
  std::vector<TokenInputs> inputs;
  for (const Document& d : docs) inputs.push_back(build_token_inputs(d, model.config().encoder));
  const std::size_t batches = (docs.size() + cfg.batch_docs - 1) / cfg.batch_docs;
  const long total_steps = static_cast<long>(batches * cfg.epochs);
  long step = 0;
  std::vector<double> log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(Rng::derive(cfg.seed, 0x66696e65ULL, epoch));
    rng.shuffle(order);
    double sum = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_docs, hi = std::min(docs.size(), lo + cfg.batch_docs);
      model.store().zero_grad();
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t di = order[k];
        Graph g;
        FinetuneLoss loss = finetune_loss(g, model, inputs[di], docs[di], cfg);
        const double v = loss.total.item();
        if (!std::isfinite(v))
          throw NumericError("non-finite fine-tuning loss on document " + docs[di].id + " (epoch " +
                             std::to_string(epoch) + ")");
        sum += v;
        g.backward(scale(loss.total, 1.0 / static_cast<double>(hi - lo)));
      }
      if (cfg.clip > 0) clip_grad_norm(model.store(), cfg.clip);
      AdamConfig a = cfg.adam;
      a.lr = linear_decay_lr(cfg.adam.lr, step++, total_steps);
      adam_step(model.store(), a);
    }
    log.push_back(sum / static_cast<double>(docs.size()));
    if (on_epoch) on_epoch(epoch, log.back());
  }
  return log;
}

std::set<IndexPair> decode_rsf(const Mat& r, double tau, bool rsf) {
  std::set<IndexPair> out;
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < r.cols(); ++k)
      if (k != i) mx = std::max(mx, r(i, k));
    for (Eigen::Index j = 0; j < r.cols(); ++j) {
      if (j == i || !(r(i, j) > 0.5)) continue;
      if (rsf && !(mx < r(i, j) + tau)) continue;
      out.emplace(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return out;
}

std::set<IndexPair> rsf_removed(const Mat& r, double tau) {
  const auto all = decode_rsf(r, tau, false), kept = decode_rsf(r, tau, true);
  std::set<IndexPair> out;
  std::set_difference(all.begin(), all.end(), kept.begin(), kept.end(), std::inserter(out, out.end()));
  return out;
}

LinkSet pairs_to_links(const Document& doc, const std::set<IndexPair>& pairs) {
  LinkSet out;
  for (const auto& [son, father] : pairs) out.emplace(doc.segments.at(father).id, doc.segments.at(son).id);
  return out;
}

double median_segment_height(const Document& doc) {
  if (doc.segments.empty()) return 0;
  std::vector<double> h;
  for (const auto& s : doc.segments) h.push_back(s.box.height());
  std::sort(h.begin(), h.end());
  const std::size_t m = h.size() / 2;
  return h.size() % 2 ? h[m] : 0.5 * (h[m - 1] + h[m]);
}

LinkSet geometric_constraint_filter(const LinkSet& links, const Document& doc, double delta) {
  LinkSet out;
  for (const Link& l : links) {
    const int fi = doc.index_of(l.first), si = doc.index_of(l.second);
    if (fi < 0 || si < 0) throw InvalidInputError("link references a segment missing from " + doc.id);
    const double rise = doc.segments[static_cast<std::size_t>(fi)].box.cy() - doc.segments[static_cast<std::size_t>(si)].box.cy();
    if (rise > delta) continue;
    out.insert(l);
  }
  return out;
}

Relations infer(GeoModel& model, const Document& doc, const DecodeConfig& cfg) {
  Relations rel;
  const std::size_t n = doc.segments.size();
  if (n == 0) return rel;
  Graph g;
  const TokenInputs in = build_token_inputs(doc, model.config().encoder);
  const EncodedDocument enc = model.encoder().encode(g, model.store(), in);
  Var r0 = model.heads().crp_logits(g, model.store(), enc.segments);
  auto sig = [](const Mat& m) -> Mat { return (1.0 / (1.0 + (-m.array()).exp())).matrix(); };
  rel.r0 = sig(r0.value());
  rel.r1 = cfg.use_rfe && n > 1 ? sig(model.heads().refine(g, model.store(), enc.segments, rel.r0).logits.value()) : rel.r0;
  if (cfg.ser && in.real_tokens > 1) {
    std::vector<std::size_t> rows;
    for (std::size_t t = 1; t < in.real_tokens; ++t) rows.push_back(t);
    const Mat logits = model.heads().ser_logits(g, model.store(), gather_rows(enc.tokens, rows)).value();
    for (Eigen::Index t = 0; t < logits.rows(); ++t) {
      Eigen::Index best;
      logits.row(t).maxCoeff(&best);
      rel.tags.push_back(static_cast<int>(best));
    }
  }
  return rel;
}

DocumentPrediction decode(const Relations& rel, const Document& doc, const DecodeConfig& cfg) {
  DocumentPrediction p;
  p.doc_id = doc.id;
  p.tags = rel.tags;
  if (rel.r1.size() == 0) return p;
  p.links = pairs_to_links(doc, decode_rsf(rel.r1, cfg.tau, cfg.rsf));
  if (cfg.geo_filter_factor > 0)
    p.links = geometric_constraint_filter(p.links, doc, cfg.geo_filter_factor * median_segment_height(doc));
  return p;
}

std::vector<DocumentPrediction> predict(GeoModel& model, const std::vector<Document>& docs, const DecodeConfig& cfg,
                                        std::size_t jobs) {
  std::vector<DocumentPrediction> out(docs.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < docs.size(); i += stride) out[i] = decode(infer(model, docs[i], cfg), docs[i], cfg);
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, docs.size()));
  if (jobs == 1) {
    work(0, 1);
  } else {
    // Forward passes only read the parameter store.
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(work, t, jobs);
    for (auto& th : pool) th.join();
  }
  return out;
}

std::vector<FewShotPoint> few_shot_harness(const GeoModel& pretrained, const std::vector<Document>& pool,
                                           const std::vector<Document>& test, const std::vector<std::size_t>& shots,
                                           const std::vector<std::uint64_t>& seeds, const FinetuneConfig& ft,
                                           const DecodeConfig& dec) {
  for (std::size_t k : shots)
    if (k == 0 || k > pool.size())
      throw InvalidInputError("shot count " + std::to_string(k) + " outside 1.." + std::to_string(pool.size()));
  std::vector<FewShotPoint> out;
  for (std::size_t k : shots)
    for (std::uint64_t seed : seeds) {
      Rng rng(Rng::derive(seed, 0x73686f74ULL, k));
      std::vector<Document> subset;
      for (std::size_t i : rng.sample_without_replacement(pool.size(), k)) subset.push_back(pool[i]);
      for (const char* variant : {"pretrained-heads", "random-heads"}) {
        GeoModel m = pretrained;
        if (std::string(variant) == "random-heads") m.reinit_relation_heads(Rng::derive(seed, 0x68656164ULL));
        FinetuneConfig c = ft;
        c.seed = seed;
        finetune(m, subset, c);
        out.push_back({k, variant, seed, evaluate(predict(m, test, dec), test).re});
      }
    }
  return out;
}

}  // namespace geolab
