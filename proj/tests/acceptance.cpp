// Acceptance driver: one PASS/FAIL line per criterion, exit status 0 only
// when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geolab/errors.hpp"
#include "geolab/experiment.hpp"
#include "geolab/finetune.hpp"
#include "geolab/funsd.hpp"
#include "geolab/probe.hpp"
#include "geolab/synth.hpp"
#include "oracles.hpp"

using namespace geolab;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int n, const std::string& name, const Verdict& v) {
  if (!v.pass) ++failures;
  std::printf("%s criterion %2d %-22s %s\n", v.pass ? "PASS" : "FAIL", n, name.c_str(), v.detail.c_str());
  std::fflush(stdout);
}

// 1 ----------------------------------------------------------------------

Verdict geometry_oracles() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  std::size_t dir_bad = 0, dist_bad = 0, col_bad = 0;
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const BBox a = oracle::random_box(rng), b = oracle::random_box(rng);
    if (static_cast<int>(direction(a, b)) != oracle::direction(a, b)) ++dir_bad;
    const double err = std::abs(min_distance(a, b) - oracle::min_distance(a, b));
    worst = std::max(worst, err);
    if (err > 1e-3) ++dist_bad;
  }
  for (int i = 0; i < 10000; ++i) {
    std::array<BBox, 3> t = oracle::random_triplet(rng);
    const int want = oracle::collinearity(t[0], t[1], t[2]);
    std::array<int, 3> p{0, 1, 2};
    do {
      if (static_cast<int>(collinearity(t[p[0]], t[p[1]], t[p[2]])) != want) {
        ++col_bad;
        break;
      }
    } while (std::next_permutation(p.begin(), p.end()));
  }
  const double secs = since(t0);
  return {dir_bad + dist_bad + col_bad == 0 && secs < 10.0,
          "direction_mismatch=" + std::to_string(dir_bad) + " distance_mismatch=" + std::to_string(dist_bad) +
              " collinearity_mismatch=" + std::to_string(col_bad) + " max_distance_err=" + fmt("%.2e", worst) +
              " time=" + fmt("%.2fs", secs)};
}

// 2 ----------------------------------------------------------------------

Verdict gradients() {
  const auto t0 = Clock::now();
  const auto checks = run_grad_checks(1);
  double worst = 0;
  std::string where;
  for (const auto& c : checks)
    if (c.result.max_rel_error >= worst) {
      worst = c.result.max_rel_error;
      where = c.name + ":" + c.result.worst;
    }
  const double secs = since(t0);
  return {!checks.empty() && worst < 1e-4 && secs < 120.0,
          "checks=" + std::to_string(checks.size()) + " max_rel_error=" + fmt("%.2e", worst) + " at " + where +
              " time=" + fmt("%.1fs", secs)};
}

// 3 ----------------------------------------------------------------------

Verdict closed_form_losses(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.pretrain_docs = 32;
  c.finetune_docs = c.test_docs = 1;
  const Corpora data = build_corpora(c, 11);
  GeoModel model(model_config(c, data.vocab), 11);
  TaskLosses sum;
  std::size_t n = 0, n_dde = 0;
  for (std::size_t i = 0; i < data.pretrain.size(); ++i) {
    const TokenInputs in = build_token_inputs(data.pretrain[i], model.config().encoder);
    Rng rng(Rng::derive(11, i));
    const GeoLabelSet l = make_labels(data.pretrain[i], in.ids, data.vocab.size(), c.pretrain.sampling, rng);
    nn::Graph g;
    const PretrainLoss r = pretrain_loss(g, model, in, l, TaskToggles{});
    sum.ddm_direction += r.parts.ddm_direction;
    sum.ddm_nearest += r.parts.ddm_nearest;
    sum.cit += r.parts.cit;
    if (!l.dde.skipped) {
      sum.dde += r.parts.dde;
      ++n_dde;
    }
    ++n;
  }
  const double dir = sum.ddm_direction / n, near = sum.ddm_nearest / n, cit = sum.cit / n;
  const double dde = n_dde ? sum.dde / n_dde : 0;
  const bool ok = std::abs(dir - std::log(9.0)) <= 0.05 && std::abs(cit - std::log(5.0)) <= 0.05 &&
                  std::abs(near - std::log(2.0)) <= 0.05 && n_dde > 0 && std::abs(dde - std::log(2.0)) <= 0.05;
  return {ok, "docs=" + std::to_string(n) + " direction_ce=" + fmt("%.4f", dir) + " (ln9=" + fmt("%.4f", std::log(9.0)) +
                  ") cit_ce=" + fmt("%.4f", cit) + " (ln5=" + fmt("%.4f", std::log(5.0)) + ") nearest_bce=" +
                  fmt("%.4f", near) + " dde_bce=" + fmt("%.4f", dde) + " (ln2=" + fmt("%.4f", std::log(2.0)) + ")"};
}

// 4 ----------------------------------------------------------------------

Verdict segmentation_stats() {
  Rng rng(404);
  TextSegment line;
  line.id = 0;
  for (int w = 0; w < 10; ++w) line.words.push_back({"w" + std::to_string(w), BBox{w * 20.0, 0, w * 20.0 + 15, 12}});
  line.refresh_box();
  const std::size_t trials = 100000;
  std::size_t split = 0, identity = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    const LineSplit s = poisson_line_segmentation(line, rng);
    split += s.split_branch;
    std::vector<std::string> cat;
    for (const auto& p : s.parts)
      for (const auto& w : p.words) cat.push_back(w.text);
    std::vector<std::string> orig;
    for (const auto& w : line.words) orig.push_back(w.text);
    identity += cat == orig;
  }
  const double frac = static_cast<double>(split) / trials, want = 1.0 - 1.0 / 9.5;
  return {std::abs(frac - want) <= 0.01 && identity == trials,
          "split_fraction=" + fmt("%.5f", frac) + " expected=" + fmt("%.5f", want) + " concatenation_identity=" +
              std::to_string(identity) + "/" + std::to_string(trials)};
}

// 5-9 --------------------------------------------------------------------

bool has_multi_father(const Document& d) {
  std::map<int, int> fathers;
  for (const auto& l : d.links)
    if (++fathers[l.second] > 1) return true;
  return false;
}

struct SeedStudy {
  std::uint64_t seed = 0;
  PRF geo, mvlm_only, random_heads;
  PRF mf_threshold, mf_rsf;  ///< multi-father test documents
  std::size_t mf_docs = 0, subset_violations = 0;
  ProbeResult probe_geo, probe_random;
  std::vector<FewShotPoint> fewshot;
  double c5_seconds = 0;
};

SeedStudy run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedStudy s;
  s.seed = seed;
  DecodeConfig dc = cfg.decode;
  dc.ser = cfg.finetune.ser;
  DecodeConfig threshold = dc;
  threshold.rsf = false;
  DecodeConfig rsf = dc;
  rsf.rsf = true;
  FinetuneConfig with_var = cfg.finetune;
  with_var.variance_loss = true;
  FinetuneConfig no_var = cfg.finetune;
  no_var.variance_loss = false;

  auto t0 = Clock::now();
  const Corpora data = build_corpora(cfg, seed);
  const auto train = head_of(data.finetune, cfg.finetune_train_docs);
  auto score = [&](GeoModel& m, const std::vector<Document>& docs, const DecodeConfig& d) {
    return evaluate(predict(m, docs, d, cfg.jobs), docs).re;
  };

  const GeoModel geo = run_pretrain(cfg, data, TaskToggles{}, seed);
  const GeoModel mvlm = run_pretrain(cfg, data, TaskToggles{true, false, false, false}, seed);
  GeoModel ft_geo = run_finetune(geo, train, cfg.finetune, HeadInit::Pretrained, seed);
  GeoModel ft_mvlm = run_finetune(mvlm, train, cfg.finetune, HeadInit::Pretrained, seed);
  s.geo = score(ft_geo, data.test, dc);
  s.mvlm_only = score(ft_mvlm, data.test, dc);
  s.c5_seconds = since(t0);

  GeoModel ft_random = run_finetune(geo, train, cfg.finetune, HeadInit::RandomHeads, seed);
  s.random_heads = score(ft_random, data.test, dc);

  std::vector<Document> mf;
  for (const auto& d : data.test)
    if (has_multi_father(d)) mf.push_back(d);
  s.mf_docs = mf.size();
  GeoModel m_var = run_finetune(geo, train, with_var, HeadInit::Pretrained, seed);
  GeoModel m_novar = run_finetune(geo, train, no_var, HeadInit::Pretrained, seed);
  s.mf_threshold = score(m_novar, mf, threshold);
  s.mf_rsf = score(m_var, mf, rsf);
  const auto a = predict(m_var, data.test, threshold, cfg.jobs), b = predict(m_var, data.test, rsf, cfg.jobs);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::includes(a[i].links.begin(), a[i].links.end(), b[i].links.begin(), b[i].links.end())) ++s.subset_violations;

  GeoModel geo_copy = geo;
  GeoModel initial(geo.config(), Rng::derive(seed, 0x6d6f64656cULL));
  const auto ptrain = head_of(data.finetune, cfg.probe_train_docs), ptest = head_of(data.test, cfg.probe_test_docs);
  s.probe_geo = direction_probe(geo_copy, ptrain, ptest, cfg.probe);
  s.probe_random = direction_probe(initial, ptrain, ptest, cfg.probe);

  s.fewshot = few_shot_harness(geo, data.finetune, data.test, cfg.fewshot_shots, {seed}, cfg.finetune, dc);
  return s;
}

double mean_f1(const std::vector<SeedStudy>& runs, PRF SeedStudy::*field) {
  double m = 0;
  for (const auto& r : runs) m += (r.*field).f1();
  return m / static_cast<double>(runs.size());
}

std::string per_seed(const std::vector<SeedStudy>& runs, PRF SeedStudy::*field) {
  std::string s;
  for (const auto& r : runs) s += (s.empty() ? "" : "/") + fmt("%.4f", (r.*field).f1());
  return s;
}

Verdict geometric_pretraining_helps(const std::vector<SeedStudy>& runs) {
  const double geo = mean_f1(runs, &SeedStudy::geo), base = mean_f1(runs, &SeedStudy::mvlm_only);
  double secs = 0;
  for (const auto& r : runs) secs += r.c5_seconds;
  return {geo - base >= 0.05 && secs <= 1200.0,
          "mean_f1 geometric=" + fmt("%.4f", geo) + " mvlm_only=" + fmt("%.4f", base) + " gain=" +
              fmt("%+.4f", geo - base) + " per_seed=" + per_seed(runs, &SeedStudy::geo) + " vs " +
              per_seed(runs, &SeedStudy::mvlm_only) + " time=" + fmt("%.0fs", secs)};
}

Verdict head_pretraining_helps(const std::vector<SeedStudy>& runs) {
  const double pt = mean_f1(runs, &SeedStudy::geo), rnd = mean_f1(runs, &SeedStudy::random_heads);
  return {pt > rnd, "mean_f1 pretrained_heads=" + fmt("%.4f", pt) + " random_heads=" + fmt("%.4f", rnd) +
                        " per_seed=" + per_seed(runs, &SeedStudy::geo) + " vs " +
                        per_seed(runs, &SeedStudy::random_heads)};
}

Verdict rsf_behaviour(const std::vector<SeedStudy>& runs) {
  PRF thr, rsf;
  std::size_t docs = 0, violations = 0;
  for (const auto& r : runs) {
    thr += r.mf_threshold;
    rsf += r.mf_rsf;
    docs += r.mf_docs;
    violations += r.subset_violations;
  }
  const bool ok = docs > 0 && rsf.precision() > thr.precision() && rsf.f1() >= thr.f1() && violations == 0;
  return {ok, "multi_father_docs=" + std::to_string(docs) + " threshold P/R/F1=" + fmt("%.4f", thr.precision()) + "/" +
                  fmt("%.4f", thr.recall()) + "/" + fmt("%.4f", thr.f1()) + " rsf+variance P/R/F1=" +
                  fmt("%.4f", rsf.precision()) + "/" + fmt("%.4f", rsf.recall()) + "/" + fmt("%.4f", rsf.f1()) +
                  " subset_violations=" + std::to_string(violations)};
}

Verdict probe_pattern(const std::vector<SeedStudy>& runs) {
  double ag = 0, ar = 0, eg = 0, er = 0, maj = 0;
  for (const auto& r : runs) {
    ag += r.probe_geo.stats.accuracy;
    ar += r.probe_random.stats.accuracy;
    eg += r.probe_geo.stats.entropy;
    er += r.probe_random.stats.entropy;
    maj += r.probe_geo.majority;
  }
  const double n = static_cast<double>(runs.size());
  ag /= n, ar /= n, eg /= n, er /= n, maj /= n;
  return {ag - ar >= 0.10 && eg < er, "accuracy geometric=" + fmt("%.4f", ag) + " random=" + fmt("%.4f", ar) +
                                          " majority=" + fmt("%.4f", maj) + " entropy geometric=" + fmt("%.4f", eg) +
                                          " random=" + fmt("%.4f", er)};
}

Verdict few_shot_pattern(const std::vector<SeedStudy>& runs, const std::vector<std::size_t>& shots) {
  std::map<std::pair<std::size_t, std::string>, std::vector<double>> by;
  for (const auto& r : runs)
    for (const auto& p : r.fewshot) by[{p.shots, p.variant}].push_back(p.re.f1());
  auto mean = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    return v.empty() ? 0.0 : m / static_cast<double>(v.size());
  };
  bool ok = !shots.empty();
  std::string detail;
  for (std::size_t k : shots) {
    const double pt = mean(by[{k, "pretrained-heads"}]), rnd = mean(by[{k, "random-heads"}]);
    ok = ok && pt >= rnd && !by[{k, "pretrained-heads"}].empty();
    detail += (detail.empty() ? "" : " ") + std::string("shots=") + std::to_string(k) + ":" + fmt("%.4f", pt) +
              (pt >= rnd ? ">=" : "<") + fmt("%.4f", rnd);
  }
  return {ok, detail};
}

// 10 ---------------------------------------------------------------------

Verdict harmonic_mean() {
  // 8894 of 10000 predicted links correct, 9887 gold links: P = 88.94,
  // R = 89.96 to two decimals.
  Document gold;
  gold.id = "prf";
  DocumentPrediction pred;
  pred.doc_id = gold.id;
  const int n_gold = 9887, tp = 8894, n_pred = 10000;
  for (int i = 0; i < n_gold; ++i) gold.links.insert({2 * i, 2 * i + 1});
  for (int i = 0; i < tp; ++i) pred.links.insert({2 * i, 2 * i + 1});
  for (int i = 0; pred.links.size() < static_cast<std::size_t>(n_pred); ++i) pred.links.insert({2 * i + 1, 2 * i});
  const MetricsReport r = evaluate({pred}, {gold});
  const double p = 100 * r.re.precision(), rc = 100 * r.re.recall(), f = 100 * r.re.f1();
  return {std::abs(std::round(p * 100) / 100 - 88.94) < 1e-9 && std::abs(std::round(rc * 100) / 100 - 89.96) < 1e-9 &&
              std::abs(f - 89.45) <= 0.01,
          "P=" + fmt("%.4f", p) + " R=" + fmt("%.4f", rc) + " F1=" + fmt("%.4f", f)};
}

// 11 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> metric_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const char* dir : {"metrics", "report"}) {
    if (!fs::is_directory(root / dir)) continue;
    for (const auto& e : fs::directory_iterator(root / dir))
      if (e.is_regular_file() && e.path().extension() != ".json") out[std::string(dir) + "/" + e.path().filename().string()] = slurp(e.path());
  }
  return out;
}

Verdict determinism(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.pretrain_docs = 40;
  c.finetune_docs = 10;
  c.test_docs = 10;
  c.pretrain.epochs = 2;
  c.finetune.epochs = 5;
  c.probe.steps = 50;
  c.probe_train_docs = 10;
  c.probe_test_docs = 5;
  // Same configuration (output directory included) twice, from scratch; only
  // the worker count changes.
  c.out = fs::temp_directory_path() / "geolab_acceptance_det";
  std::map<std::string, std::string> files[2];
  for (int rep = 0; rep < 2; ++rep) {
    fs::remove_all(c.out);
    const RunOptions opt{true, rep == 0 ? std::size_t{1} : std::size_t{2}, nullptr};
    cmd_gen_corpus(c, opt);
    cmd_prepare_labels(c, opt);
    cmd_pretrain(c, opt);
    cmd_finetune(c, opt);
    cmd_evaluate(c, opt);
    cmd_probe(c, opt);
    cmd_report(c, opt);
    files[rep] = metric_files(c.out);
    fs::remove_all(c.out);
  }
  std::size_t differing = 0;
  for (const auto& [name, text] : files[0]) differing += !files[1].count(name) || files[1].at(name) != text;
  differing += files[1].size() != files[0].size();
  return {!files[0].empty() && differing == 0,
          "metrics_files=" + std::to_string(files[0].size()) + " differing=" + std::to_string(differing) +
              " (jobs 1 vs 2)"};
}

// 12 ---------------------------------------------------------------------

Verdict funsd_ingestion() {
  const fs::path data = GEOLAB_TEST_DATA;
  std::size_t idempotent = 0, samples = 0, named = 0, malformed = 0;
  std::string missing;
  for (const char* name : {"funsd_sample_a.json", "funsd_sample_b.json"}) {
    ++samples;
    const Document a = load_funsd(data / name);
    const Document b = parse_funsd(to_funsd_json(a), a.id);
    const Document c = parse_funsd(to_funsd_json(b), b.id);
    idempotent += a == b && b == c && to_funsd_json(b).dump() == to_funsd_json(c).dump();
  }
  const std::vector<std::pair<std::string, std::string>> bad = {{"malformed_box.json", "form[0].box"},
                                                                {"malformed_label.json", "form[0].label"},
                                                                {"malformed_missing_words.json", "form[0].words"},
                                                                {"malformed_linking.json", "form[0].linking[0]"},
                                                                {"malformed_json.json", "$"}};
  for (const auto& [file, field] : bad) {
    ++malformed;
    try {
      load_funsd(data / file);
      missing += " " + file + ":accepted";
    } catch (const ParseError& e) {
      if (std::string(e.what()).find(field) != std::string::npos) ++named;
      else missing += " " + file + ":" + e.what();
    }
  }
  return {idempotent == samples && named == malformed,
          "idempotent=" + std::to_string(idempotent) + "/" + std::to_string(samples) + " named_field_errors=" +
              std::to_string(named) + "/" + std::to_string(malformed) + missing};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geolab acceptance criteria"};
  std::string config = GEOLAB_DESK_CONFIG;
  std::vector<int> only;
  app.add_option("--config", config, "experiment configuration for criteria 3 and 5-9");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);
  auto want = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

  try {
    const ExperimentConfig cfg = load_config(config);
    std::printf("config %s hash %s seeds %zu\n", config.c_str(), cfg.hash().c_str(), cfg.seeds.size());
    if (want(1)) report(1, "geometry-oracles", geometry_oracles());
    if (want(2)) report(2, "gradient-check", gradients());
    if (want(3)) report(3, "closed-form-losses", closed_form_losses(cfg));
    if (want(4)) report(4, "line-segmentation", segmentation_stats());
    if (want(5) || want(6) || want(7) || want(8) || want(9)) {
      std::vector<SeedStudy> runs;
      const auto t0 = Clock::now();
      for (std::uint64_t seed : cfg.seeds) {
        runs.push_back(run_seed(cfg, seed));
        std::printf("  seed %llu done (%.0fs)\n", static_cast<unsigned long long>(seed), since(t0));
        std::fflush(stdout);
      }
      if (want(5)) report(5, "geometric-pretraining", geometric_pretraining_helps(runs));
      if (want(6)) report(6, "head-pretraining", head_pretraining_helps(runs));
      if (want(7)) report(7, "rsf-multi-father", rsf_behaviour(runs));
      if (want(8)) report(8, "direction-probe", probe_pattern(runs));
      if (want(9)) report(9, "few-shot", few_shot_pattern(runs, cfg.fewshot_shots));
    }
    if (want(10)) report(10, "harmonic-mean", harmonic_mean());
    if (want(11)) report(11, "determinism", determinism(cfg));
    if (want(12)) report(12, "funsd-ingestion", funsd_ingestion());
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
