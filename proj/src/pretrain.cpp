#include <cmath>
#include <fstream>
#include <sstream>

#include "geolab/errors.hpp"
#include "geolab/pretrain.hpp"

namespace geolab {

using namespace nn;

std::string TaskToggles::name() const {
  std::string s;
  auto add = [&](bool on, const char* n) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += n;
  };
  add(mvlm, "mvlm");
  add(ddm, "ddm");
  add(dde, "dde");
  add(cit, "cit");
  return s.empty() ? "none" : s;
}

PretrainLoss pretrain_loss(Graph& g, GeoModel& model, const TokenInputs& in, const GeoLabelSet& labels,
                           const TaskToggles& tasks) {
  ParameterStore& store = model.store();
  const Heads& heads = model.heads();
  const bool mvlm = tasks.mvlm && !labels.mvlm.positions.empty();
  const EncodedDocument enc = model.encoder().encode(g, store, in, mvlm ? &labels.mvlm.input_ids : nullptr);

  PretrainLoss out;
  std::vector<Var> terms;
  if (mvlm) {
    Var l = cross_entropy(heads.mvlm_logits(g, store, enc.tokens, labels.mvlm.positions), labels.mvlm.original);
    out.parts.mvlm = l.item();
    terms.push_back(l);
  }
  if (tasks.ddm && !labels.ddm.empty()) {
    std::vector<IndexPair> pairs;
    std::vector<int> dir;
    Mat near(static_cast<Eigen::Index>(labels.ddm.size()), 1);
    for (std::size_t k = 0; k < labels.ddm.size(); ++k) {
      const DdmPair& p = labels.ddm[k];
      pairs.emplace_back(p.anchor, p.partner);
      dir.push_back(p.direction);
      near(static_cast<Eigen::Index>(k), 0) = p.nearest;
    }
    Var ce = cross_entropy(heads.direction_logits(g, store, enc.segments, pairs), dir);
    Var bce = bce_with_logits(gather_elements(heads.crp_logits(g, store, enc.segments), pairs), near);
    out.parts.ddm_direction = ce.item();
    out.parts.ddm_nearest = bce.item();
    terms.push_back(ce);
    terms.push_back(bce);
  }
  if (tasks.dde && !labels.dde.skipped) {
    std::vector<IndexPair> sample;
    Mat y(static_cast<Eigen::Index>(labels.dde.sample.size()), 1);
    for (std::size_t k = 0; k < labels.dde.sample.size(); ++k) {
      sample.push_back(labels.dde.sample[k].pair);
      y(static_cast<Eigen::Index>(k), 0) = labels.dde.sample[k].label;
    }
    Var pos = heads.pair_features(g, store, enc.segments, labels.dde.positive);
    Var qry = heads.pair_features(g, store, enc.segments, sample);
    Var l = bce_with_logits(heads.rfe_logits(g, store, pos, qry), y);
    out.parts.dde = l.item();
    terms.push_back(l);
  }
  if (tasks.cit && !labels.cit.empty()) {
    std::vector<Triplet> t;
    std::vector<int> cls;
    for (const CitTriplet& c : labels.cit) {
      t.push_back(c.t);
      cls.push_back(c.cls);
    }
    Var l = cross_entropy(heads.cit_logits(g, store, enc.segments, t), cls);
    out.parts.cit = l.item();
    terms.push_back(l);
  }
  out.any_task = !terms.empty();
  out.total = out.any_task ? add_scalars(terms) : g.constant(Mat::Zero(1, 1));
  return out;
}

namespace {

void dump_batch(const std::filesystem::path& path, std::size_t epoch, const std::vector<std::string>& ids,
                const std::string& offender, const TaskLosses& l) {
  if (path.empty()) return;
  nlohmann::json j = {{"epoch", epoch},
                      {"batch", ids},
                      {"offending_document", offender},
                      {"losses",
                       {{"mvlm", l.mvlm}, {"ddm_direction", l.ddm_direction}, {"ddm_nearest", l.ddm_nearest},
                        {"dde", l.dde}, {"cit", l.cit}}}};
  std::ofstream(path) << j.dump(2) << '\n';
}

}  // namespace

PretrainLog pretrain(GeoModel& model, const std::vector<Document>& docs, const PretrainConfig& cfg,
                     const std::function<void(std::size_t, const TaskLosses&)>& on_epoch) {
  cfg.sampling.validate();
  if (docs.empty()) throw InvalidInputError("pre-training corpus is empty");
  if (cfg.batch_docs == 0) throw ConfigError("batch_docs must be positive");
  const auto& ecfg = model.config().encoder;
  std::vector<TokenInputs> inputs;
  inputs.reserve(docs.size());
  for (const Document& d : docs) inputs.push_back(build_token_inputs(d, ecfg, 0));

  const std::size_t batches = (docs.size() + cfg.batch_docs - 1) / cfg.batch_docs;
  const long total_steps = static_cast<long>(batches * cfg.epochs);
  long step = 0;
  PretrainLog log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng order_rng(Rng::derive(cfg.seed, 0x6f72646572ULL, epoch));
    order_rng.shuffle(order);

    TaskLosses sum;
    std::size_t skipped = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_docs, hi = std::min(docs.size(), lo + cfg.batch_docs);
      model.store().zero_grad();
      std::vector<std::string> ids;
      for (std::size_t k = lo; k < hi; ++k) ids.push_back(docs[order[k]].id);
      bool any = false;
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t di = order[k];
        GeoLabelSet fresh;
        const GeoLabelSet* labels = cfg.cached ? cfg.cached(di, epoch) : nullptr;
        if (!labels) {
          Rng rng(label_seed(cfg.seed, di, epoch));
          fresh = make_labels(docs[di], inputs[di].ids, ecfg.vocab_size, cfg.sampling, rng);
          labels = &fresh;
        }
        if (cfg.verify) verify_labels(docs[di], *labels, cfg.sampling);
        if (labels->dde.skipped) ++skipped;
        Graph g;
        PretrainLoss loss = pretrain_loss(g, model, inputs[di], *labels, cfg.tasks);
        if (!std::isfinite(loss.total.item())) {
          dump_batch(cfg.dump_path, epoch, ids, docs[di].id, loss.parts);
          std::ostringstream msg;
          msg << "non-finite pre-training loss on document " << docs[di].id << " (epoch " << epoch
              << ", mvlm=" << loss.parts.mvlm << ", ddm=" << loss.parts.ddm() << ", dde=" << loss.parts.dde
              << ", cit=" << loss.parts.cit << ")";
          throw NumericError(msg.str());
        }
        sum.mvlm += loss.parts.mvlm;
        sum.ddm_direction += loss.parts.ddm_direction;
        sum.ddm_nearest += loss.parts.ddm_nearest;
        sum.dde += loss.parts.dde;
        sum.cit += loss.parts.cit;
        if (!loss.any_task) continue;
        any = true;
        g.backward(scale(loss.total, 1.0 / static_cast<double>(hi - lo)));
      }
      if (any) {
        if (cfg.clip > 0) clip_grad_norm(model.store(), cfg.clip);
        AdamConfig a = cfg.adam;
        a.lr = linear_decay_lr(cfg.adam.lr, step, total_steps);
        adam_step(model.store(), a);
      }
      ++step;
    }
    const double inv = 1.0 / static_cast<double>(docs.size());
    TaskLosses mean{sum.mvlm * inv, sum.ddm_direction * inv, sum.ddm_nearest * inv, sum.dde * inv, sum.cit * inv};
    log.epochs.push_back(mean);
    log.skipped_dde.push_back(skipped);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return log;
}

}  // namespace geolab
