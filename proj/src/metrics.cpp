#include "geolab/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "geolab/errors.hpp"

namespace geolab {

double PRF::precision() const { return npred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(npred); }
double PRF::recall() const { return ngold == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(ngold); }
double PRF::f1() const { return harmonic_f1(precision(), recall()); }

PRF& PRF::operator+=(const PRF& o) {
  tp += o.tp;
  npred += o.npred;
  ngold += o.ngold;
  return *this;
}

double harmonic_f1(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

int bio_tag(EntityLabel label, bool begin) {
  if (label == EntityLabel::Other) return 0;
  return 1 + 2 * static_cast<int>(label) + (begin ? 0 : 1);
}

std::string bio_tag_name(int tag) {
  static const char* names[] = {"O", "B-header", "I-header", "B-question", "I-question", "B-answer", "I-answer"};
  if (tag < 0 || tag > 6) throw InvalidInputError("tag id " + std::to_string(tag) + " out of range");
  return names[tag];
}

std::vector<int> gold_tags(const Document& doc) {
  std::vector<int> tags;
  for (const auto& s : doc.segments)
    for (std::size_t t = 0; t < s.token_ids.size(); ++t) tags.push_back(bio_tag(s.label, t == 0));
  return tags;
}

std::vector<Entity> decode_bio(std::span<const int> tags) {
  std::vector<Entity> out;
  bool open = false;
  Entity cur;
  auto close = [&](std::size_t end) {
    if (!open) return;
    cur.end = end;
    out.push_back(cur);
    open = false;
  };
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const int tag = tags[t];
    if (tag <= 0) {
      close(t);
      continue;
    }
    const int type = (tag - 1) / 2;
    const bool begin = (tag - 1) % 2 == 0;
    if (begin || !open || cur.type != type) {
      close(t);
      cur = {t, t, type};
      open = true;
    }
  }
  close(tags.size());
  return out;
}

PRF entity_prf(std::span<const int> gold, std::span<const int> pred) {
  const auto g = decode_bio(gold), p = decode_bio(pred);
  const std::set<Entity> gs(g.begin(), g.end());
  PRF r{0, p.size(), g.size()};
  for (const Entity& e : p) r.tp += gs.count(e);
  return r;
}

PRF link_prf(const LinkSet& pred, const LinkSet& gold) {
  PRF r{0, pred.size(), gold.size()};
  for (const Link& l : pred) r.tp += gold.count(l);
  return r;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_text() const {
  std::ostringstream o;
  for (const auto& [k, v] : meta) o << "meta." << k << " = " << v << '\n';
  auto prf = [&](const char* name, const PRF& p) {
    o << name << ".precision = " << fmt6(p.precision()) << '\n';
    o << name << ".recall = " << fmt6(p.recall()) << '\n';
    o << name << ".f1 = " << fmt6(p.f1()) << '\n';
    o << name << ".tp = " << p.tp << '\n';
    o << name << ".npred = " << p.npred << '\n';
    o << name << ".ngold = " << p.ngold << '\n';
  };
  prf("re", re);
  prf("ser", ser);
  if (probe) {
    o << "probe.entropy = " << fmt6(probe->entropy) << '\n';
    o << "probe.xent = " << fmt6(probe->xent) << '\n';
    o << "probe.acc = " << fmt6(probe->accuracy) << '\n';
  }
  for (const auto& [k, v] : extra) o << k << " = " << fmt6(v) << '\n';
  return o.str();
}

MetricsReport MetricsReport::from_text(const std::string& text) {
  MetricsReport r;
  std::istringstream in(text);
  ProbeStats ps;
  bool have_probe = false;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ParseError("line " + std::to_string(lineno), "expected 'key = value'");
    const std::string k = line.substr(0, eq), v = line.substr(eq + 3);
    auto num = [&]() {
      try {
        return std::stod(v);
      } catch (const std::exception&) {
        throw ParseError(k, "not a number: '" + v + "'");
      }
    };
    auto count = [&]() { return static_cast<std::size_t>(num()); };
    if (k.rfind("meta.", 0) == 0) r.meta[k.substr(5)] = v;
    else if (k == "re.tp") r.re.tp = count();
    else if (k == "re.npred") r.re.npred = count();
    else if (k == "re.ngold") r.re.ngold = count();
    else if (k == "ser.tp") r.ser.tp = count();
    else if (k == "ser.npred") r.ser.npred = count();
    else if (k == "ser.ngold") r.ser.ngold = count();
    else if (k.rfind("re.", 0) == 0 || k.rfind("ser.", 0) == 0) continue;  // derived from counts
    else if (k == "probe.entropy") ps.entropy = num(), have_probe = true;
    else if (k == "probe.xent") ps.xent = num(), have_probe = true;
    else if (k == "probe.acc") ps.accuracy = num(), have_probe = true;
    else r.extra[k] = num();
  }
  if (have_probe) r.probe = ps;
  return r;
}

MetricsReport evaluate(const std::vector<DocumentPrediction>& preds, const std::vector<Document>& gold) {
  if (preds.size() != gold.size())
    throw EvaluationError(std::to_string(preds.size()) + " predictions for " + std::to_string(gold.size()) + " documents");
  MetricsReport r;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (preds[i].doc_id != gold[i].id)
      throw EvaluationError("prediction " + std::to_string(i) + " is for '" + preds[i].doc_id + "', expected '" +
                            gold[i].id + "'");
    r.re += link_prf(preds[i].links, gold[i].links);
    const auto gt = gold_tags(gold[i]);
    if (!preds[i].tags.empty()) {
      if (preds[i].tags.size() != gt.size())
        throw EvaluationError("document '" + gold[i].id + "' has " + std::to_string(gt.size()) + " tokens but " +
                              std::to_string(preds[i].tags.size()) + " predicted tags");
      r.ser += entity_prf(gt, preds[i].tags);
    } else {
      r.ser.ngold += decode_bio(gt).size();
    }
  }
  return r;
}

}  // namespace geolab
