#include "geolab/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "geolab/errors.hpp"
#include "geolab/funsd.hpp"

namespace geolab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << '\n' << std::flush;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<Document> load_funsd_dir(const fs::path& dir, const LoadOptions& opts) {
  if (!fs::is_directory(dir)) throw ArtifactError("FUNSD directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& f : files) docs.push_back(load_funsd(f, opts));
  return docs;
}

void fit_tokens(std::vector<Document>& docs, std::size_t max_tokens, std::ostream* log) {
  for (Document& d : docs) {
    const std::size_t dropped = truncate_tokens(d, max_tokens);
    if (dropped) say(log, "warning: " + d.id + ": dropped " + std::to_string(dropped) + " trailing segments over the token limit");
  }
}

}  // namespace

Corpora build_corpora(const ExperimentConfig& cfg, std::uint64_t seed, std::ostream* log) {
  Corpora c;
  if (cfg.source == "funsd") {
    LoadOptions opts;
    opts.link_order = cfg.flip_links ? LinkOrder::SonFather : LinkOrder::FatherSon;
    c.finetune = load_funsd_dir(cfg.funsd_train, opts);
    c.test = load_funsd_dir(cfg.funsd_test, opts);
    c.pretrain = c.finetune;
    c.vocab = Vocabulary::build(c.finetune);
  } else {
    GeneratorSpec spec = cfg.generator;
    c.vocab = synthetic_vocabulary(spec);
    spec.num_docs = cfg.pretrain_docs;
    Rng r1(Rng::derive(seed, 1));
    c.pretrain = generate_synthetic_corpus(spec, r1, "pt-");
    spec.num_docs = cfg.finetune_docs;
    Rng r2(Rng::derive(seed, 2));
    c.finetune = generate_synthetic_corpus(spec, r2, "ft-");
    spec.num_docs = cfg.test_docs;
    Rng r3(Rng::derive(seed, 3));
    c.test = generate_synthetic_corpus(spec, r3, "te-");
  }
  Rng r4(Rng::derive(seed, 4));
  c.segmentation = apply_segmentation(c.pretrain, cfg.segmentation_prob, r4);
  for (auto* split : {&c.pretrain, &c.finetune, &c.test}) {
    tokenize(*split, c.vocab);
    fit_tokens(*split, cfg.model.encoder.max_tokens, log);
  }
  return c;
}

ModelConfig model_config(const ExperimentConfig& cfg, const Vocabulary& vocab) {
  ModelConfig mc = cfg.model;
  mc.encoder.vocab_size = vocab.size();
  mc.finalize();
  return mc;
}

GeoModel run_pretrain(const ExperimentConfig& cfg, const Corpora& data, const TaskToggles& tasks, std::uint64_t seed,
                      PretrainLog* log, std::ostream* out) {
  GeoModel model(model_config(cfg, data.vocab), Rng::derive(seed, 0x6d6f64656cULL));
  PretrainConfig pc = cfg.pretrain;
  pc.tasks = tasks;
  pc.seed = seed;
  PretrainLog l = pretrain(model, data.pretrain, pc, [&](std::size_t e, const TaskLosses& t) {
    if (out)
      *out << "pretrain[" << tasks.name() << "] epoch " << e << " mvlm=" << fmt("%.4f", t.mvlm)
           << " ddm_dir=" << fmt("%.4f", t.ddm_direction) << " ddm_near=" << fmt("%.4f", t.ddm_nearest)
           << " dde=" << fmt("%.4f", t.dde) << " cit=" << fmt("%.4f", t.cit) << '\n' << std::flush;
  });
  if (log) *log = std::move(l);
  return model;
}

GeoModel run_finetune(const GeoModel& base, const std::vector<Document>& train, const FinetuneConfig& ft, HeadInit init,
                      std::uint64_t seed, std::vector<double>* log) {
  GeoModel m = base;
  if (init == HeadInit::RandomHeads) m.reinit_relation_heads(Rng::derive(seed, 0x68656164ULL));
  FinetuneConfig c = ft;
  c.seed = seed;
  auto l = finetune(m, train, c);
  if (log) *log = std::move(l);
  return m;
}

std::vector<Document> head_of(const std::vector<Document>& docs, std::size_t n) {
  if (n == 0 || n >= docs.size()) return docs;
  return {docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n)};
}

// ---------------------------------------------------------------------------
// Stage bookkeeping

namespace {

/// Config lines relevant to a stage and everything upstream of it.
std::string stage_hash(const ExperimentConfig& cfg, const std::string& stage) {
  static const std::map<std::string, std::vector<std::string>> deps = {
      {"gen-corpus", {"experiment.seed=", "corpus.", "model.max_tokens="}},
      {"prepare-labels", {"experiment.seed=", "corpus.", "model.max_tokens=", "pretrain."}},
      {"pretrain", {"experiment.seed=", "corpus.", "model.", "pretrain."}},
      {"finetune", {"experiment.seed=", "corpus.", "model.", "pretrain.", "finetune."}},
      {"evaluate", {"experiment.seed=", "corpus.", "model.", "pretrain.", "finetune.", "decode."}},
      {"probe", {"experiment.seed=", "corpus.", "model.", "pretrain.", "probe."}},
  };
  auto it = deps.find(stage);
  if (it == deps.end()) return cfg.hash();
  std::istringstream in(cfg.canonical());
  std::string kept;
  for (std::string line; std::getline(in, line);)
    for (const auto& p : it->second)
      if (line.rfind(p, 0) == 0) {
        kept += line + "\n";
        break;
      }
  return fnv1a_hex(kept);
}

json stamp_json(const ExperimentConfig& cfg, const std::string& stage) {
  return {{"stage", stage},
          {"config_hash", cfg.hash()},
          {"stage_hash", stage_hash(cfg, stage)},
          {"seed", cfg.seed},
          {"format_version", kFormatVersion}};
}

std::map<std::string, std::string> stamp_meta(const ExperimentConfig& cfg, const std::string& stage) {
  return {{"stage", stage},
          {"config_hash", cfg.hash()},
          {"stage_hash", stage_hash(cfg, stage)},
          {"seed", std::to_string(cfg.seed)},
          {"format_version", std::to_string(kFormatVersion)}};
}

fs::path stamp_path(const fs::path& dir, const std::string& stage) { return dir / (stage + ".stamp.json"); }

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ArtifactError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ArtifactError(p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + p.string());
  out << text;
}

/// True when the stage already ran with this configuration and should be
/// skipped. Refuses (throws) on a hash mismatch unless forced.
bool already_done(const fs::path& dir, const std::string& stage, const ExperimentConfig& cfg, const RunOptions& opt) {
  const fs::path sp = stamp_path(dir, stage);
  if (!fs::exists(sp)) return false;
  const json st = read_json(sp);
  const std::string want = stage_hash(cfg, stage);
  if (st.value("stage_hash", "") != want) {
    if (opt.force) return false;
    throw ArtifactError("refusing to resume " + stage + ": " + dir.string() + " was produced with config hash " +
                        st.value("stage_hash", "?") + ", current config hash is " + want + " (use --force to overwrite)");
  }
  if (opt.force) return false;
  say(opt.log, stage + ": up to date in " + dir.string() + " (use --force to rerun)");
  return true;
}

void require(const fs::path& dir, const std::string& stage, const ExperimentConfig& cfg) {
  const fs::path sp = stamp_path(dir, stage);
  if (!fs::exists(sp))
    throw ArtifactError("missing " + stage + " artifacts in " + dir.string() + "; run `geolab " + stage + "` first");
  const json st = read_json(sp);
  if (st.value("stage_hash", "") != stage_hash(cfg, stage))
    throw ArtifactError(stage + " artifacts in " + dir.string() + " come from a different configuration (hash " +
                        st.value("stage_hash", "?") + "); rerun `geolab " + stage + " --force`");
}

void finish(const fs::path& dir, const std::string& stage, const ExperimentConfig& cfg) {
  write_text(stamp_path(dir, stage), stamp_json(cfg, stage).dump(2) + "\n");
}

void reset_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

const char* kSplits[] = {"pretrain", "finetune", "test"};

Corpora load_corpora(const Workspace& ws, const ExperimentConfig& cfg) {
  require(ws.corpus(), "gen-corpus", cfg);
  Corpora c;
  c.vocab = vocabulary_from_json(read_json(ws.corpus() / "vocab.json"));
  for (const char* split : kSplits) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(ws.corpus() / split)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    auto& docs = std::string(split) == "pretrain" ? c.pretrain : std::string(split) == "finetune" ? c.finetune : c.test;
    for (const auto& f : files) docs.push_back(load_document(f));
    tokenize(docs, c.vocab);
  }
  return c;
}

std::string losses_csv(const PretrainLog& log) {
  std::string s = "epoch,mvlm,ddm_direction,ddm_nearest,dde,cit,total,dde_skipped\n";
  for (std::size_t e = 0; e < log.epochs.size(); ++e) {
    const TaskLosses& l = log.epochs[e];
    s += std::to_string(e) + "," + fmt("%.6f", l.mvlm) + "," + fmt("%.6f", l.ddm_direction) + "," +
         fmt("%.6f", l.ddm_nearest) + "," + fmt("%.6f", l.dde) + "," + fmt("%.6f", l.cit) + "," + fmt("%.6f", l.total()) +
         "," + std::to_string(log.skipped_dde[e]) + "\n";
  }
  return s;
}

std::string prf_cols(const PRF& p) {
  return fmt("%.6f", p.precision()) + "," + fmt("%.6f", p.recall()) + "," + fmt("%.6f", p.f1());
}

}  // namespace

// ---------------------------------------------------------------------------
// Subcommands

void cmd_gen_corpus(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Workspace ws{cfg.out};
  if (already_done(ws.corpus(), "gen-corpus", cfg, opt)) return;
  const Corpora c = build_corpora(cfg, cfg.seed, opt.log);
  reset_dir(ws.corpus());
  const json meta = {{"seed", cfg.seed},
                     {"generator_spec", cfg.source == "synthetic" ? cfg.generator.to_json() : json(cfg.source)},
                     {"config_hash", cfg.hash()},
                     {"format_version", kFormatVersion}};
  for (const char* split : kSplits) {
    const auto& docs = std::string(split) == "pretrain" ? c.pretrain : std::string(split) == "finetune" ? c.finetune : c.test;
    fs::create_directories(ws.corpus() / split);
    for (const Document& d : docs) {
      json m = meta;
      m["split"] = split;
      save_document(ws.corpus() / split / (d.id + ".json"), d, m);
    }
  }
  write_text(ws.corpus() / "vocab.json", vocabulary_to_json(c.vocab).dump() + "\n");
  finish(ws.corpus(), "gen-corpus", cfg);
  say(opt.log, "gen-corpus: " + std::to_string(c.pretrain.size()) + " pre-training, " + std::to_string(c.finetune.size()) +
                   " fine-tuning, " + std::to_string(c.test.size()) + " test documents (" +
                   std::to_string(c.segmentation.documents_resegmented) + " re-segmented) in " + ws.corpus().string());
}

void cmd_prepare_labels(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Workspace ws{cfg.out};
  const Corpora c = load_corpora(ws, cfg);
  if (already_done(ws.labels(), "prepare-labels", cfg, opt)) return;
  reset_dir(ws.labels());
  const ModelConfig mc = model_config(cfg, c.vocab);
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < c.pretrain.size(); ++i) {
    const Document& d = c.pretrain[i];
    const TokenInputs in = build_token_inputs(d, mc.encoder);
    json j = {{"document_id", d.id}, {"index", i}, {"seed", cfg.seed}, {"config_hash", cfg.hash()}};
    j["epochs"] = json::array();
    for (std::size_t e = 0; e < cfg.pretrain.epochs; ++e) {
      Rng rng(label_seed(cfg.seed, i, e));
      const GeoLabelSet l = make_labels(d, in.ids, mc.encoder.vocab_size, cfg.pretrain.sampling, rng);
      verify_labels(d, l, cfg.pretrain.sampling);
      skipped += l.dde.skipped;
      j["epochs"].push_back(labels_to_json(l));
    }
    write_text(ws.labels() / (d.id + ".json"), j.dump() + "\n");
  }
  finish(ws.labels(), "prepare-labels", cfg);
  say(opt.log, "prepare-labels: " + std::to_string(c.pretrain.size()) + " documents x " + std::to_string(cfg.pretrain.epochs) +
                   " epochs verified against geometry (" + std::to_string(skipped) + " DDE skips)");
}

void cmd_pretrain(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Workspace ws{cfg.out};
  const Corpora c = load_corpora(ws, cfg);
  if (already_done(ws.pretrain(), "pretrain", cfg, opt)) return;

  std::vector<std::vector<GeoLabelSet>> cache;
  if (fs::exists(stamp_path(ws.labels(), "prepare-labels"))) {
    require(ws.labels(), "prepare-labels", cfg);
    for (const Document& d : c.pretrain) {
      const json j = read_json(ws.labels() / (d.id + ".json"));
      if (j.value("document_id", "") != d.id) throw ArtifactError("label cache entry does not match " + d.id);
      std::vector<GeoLabelSet> per;
      for (const auto& e : j.at("epochs")) per.push_back(labels_from_json(e));
      cache.push_back(std::move(per));
    }
    say(opt.log, "pretrain: using label cache in " + ws.labels().string());
  }
  ExperimentConfig run = cfg;
  if (!cache.empty())
    run.pretrain.cached = [&cache](std::size_t doc, std::size_t epoch) -> const GeoLabelSet* {
      return epoch < cache[doc].size() ? &cache[doc][epoch] : nullptr;
    };
  run.pretrain.dump_path = ws.pretrain() / "nonfinite_batch.json";
  fs::create_directories(ws.pretrain());
  PretrainLog log;
  GeoModel m = run_pretrain(run, c, cfg.pretrain.tasks, cfg.seed, &log, opt.log);
  auto meta = stamp_meta(cfg, "pretrain");
  meta["tasks"] = cfg.pretrain.tasks.name();
  m.save(ws.pretrain() / "model.geol", meta);
  write_text(ws.pretrain() / "losses.csv", losses_csv(log));
  finish(ws.pretrain(), "pretrain", cfg);
  say(opt.log, "pretrain: wrote " + (ws.pretrain() / "model.geol").string());
}

void cmd_finetune(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Workspace ws{cfg.out};
  const Corpora c = load_corpora(ws, cfg);
  require(ws.pretrain(), "pretrain", cfg);
  if (already_done(ws.finetune(), "finetune", cfg, opt)) return;
  const GeoModel base = GeoModel::load(ws.pretrain() / "model.geol");
  std::vector<double> log;
  const GeoModel m = run_finetune(base, head_of(c.finetune, cfg.finetune_train_docs), cfg.finetune, cfg.init, cfg.seed, &log);
  fs::create_directories(ws.finetune());
  auto meta = stamp_meta(cfg, "finetune");
  meta["init"] = cfg.init == HeadInit::Pretrained ? "pretrained" : "random-heads";
  m.save(ws.finetune() / "model.geol", meta);
  std::string csv = "epoch,loss\n";
  for (std::size_t e = 0; e < log.size(); ++e) csv += std::to_string(e) + "," + fmt("%.6f", log[e]) + "\n";
  write_text(ws.finetune() / "losses.csv", csv);
  finish(ws.finetune(), "finetune", cfg);
  say(opt.log, "finetune: wrote " + (ws.finetune() / "model.geol").string() + " (final loss " +
                   (log.empty() ? std::string("n/a") : fmt("%.4f", log.back())) + ")");
}

void cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Workspace ws{cfg.out};
  const Corpora c = load_corpora(ws, cfg);
  require(ws.finetune(), "finetune", cfg);
  if (already_done(ws.metrics(), "evaluate", cfg, opt)) return;
  GeoModel m = GeoModel::load(ws.finetune() / "model.geol");
  DecodeConfig dc = cfg.decode;
  dc.use_rfe = cfg.finetune.use_rfe;
  dc.ser = cfg.finetune.ser;

  std::vector<Relations> rel;
  for (const Document& d : c.test) rel.push_back(infer(m, d, dc));
  auto score = [&](const DecodeConfig& k) {
    std::vector<DocumentPrediction> p;
    for (std::size_t i = 0; i < c.test.size(); ++i) p.push_back(decode(rel[i], c.test[i], k));
    return std::make_pair(evaluate(p, c.test), p);
  };
  auto [report, preds] = score(dc);
  DecodeConfig thr = dc;
  thr.rsf = false;
  thr.geo_filter_factor = 0;
  const MetricsReport threshold = score(thr).first;
  DecodeConfig geo = thr;
  geo.geo_filter_factor = 3.0;
  const MetricsReport filtered = score(geo).first;
  report.meta = stamp_meta(cfg, "evaluate");
  auto put = [&](const std::string& k, const PRF& p) {
    report.extra[k + ".precision"] = p.precision();
    report.extra[k + ".recall"] = p.recall();
    report.extra[k + ".f1"] = p.f1();
  };
  put("re_threshold", threshold.re);
  put("re_geo_filter", filtered.re);
  fs::create_directories(ws.metrics());
  write_text(ws.metrics() / "eval.txt", report.to_text());
  json pj = json::array();
  for (const auto& p : preds) {
    json links = json::array();
    for (const auto& [f, s] : p.links) links.push_back({f, s});
    pj.push_back({{"document_id", p.doc_id}, {"links", links}, {"tags", p.tags}});
  }
  write_text(ws.metrics() / "predictions.json", pj.dump() + "\n");
  finish(ws.metrics(), "evaluate", cfg);
  say(opt.log, "evaluate: RE P=" + fmt("%.4f", report.re.precision()) + " R=" + fmt("%.4f", report.re.recall()) +
                   " F1=" + fmt("%.4f", report.re.f1()) + ", SER F1=" + fmt("%.4f", report.ser.f1()));
}

void cmd_probe(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Workspace ws{cfg.out};
  const Corpora c = load_corpora(ws, cfg);
  require(ws.pretrain(), "pretrain", cfg);
  if (already_done(ws.metrics(), "probe", cfg, opt)) return;
  GeoModel trained = GeoModel::load(ws.pretrain() / "model.geol");
  GeoModel initial(trained.config(), Rng::derive(cfg.seed, 0x6d6f64656cULL));
  ProbeConfig pc = cfg.probe;
  pc.seed = cfg.seed;
  const auto train = head_of(c.finetune, cfg.probe_train_docs), test = head_of(c.test, cfg.probe_test_docs);
  const ProbeResult a = direction_probe(trained, train, test, pc);
  const ProbeResult b = direction_probe(initial, train, test, pc);
  MetricsReport r;
  r.meta = stamp_meta(cfg, "probe");
  r.probe = a.stats;
  r.extra["probe_random.entropy"] = b.stats.entropy;
  r.extra["probe_random.xent"] = b.stats.xent;
  r.extra["probe_random.acc"] = b.stats.accuracy;
  r.extra["probe.majority"] = a.majority;
  fs::create_directories(ws.metrics());
  write_text(ws.metrics() / "probe.txt", r.to_text());
  finish(ws.metrics(), "probe", cfg);
  say(opt.log, "probe: pretrained acc=" + fmt("%.4f", a.stats.accuracy) + " entropy=" + fmt("%.4f", a.stats.entropy) +
                   "; initial acc=" + fmt("%.4f", b.stats.accuracy) + " entropy=" + fmt("%.4f", b.stats.entropy) +
                   "; majority=" + fmt("%.4f", a.majority));
}

// ---------------------------------------------------------------------------
// Ablation grids, computed in memory per seed.

namespace {

struct GridRow {
  std::string grid, row, setting;
  std::uint64_t seed;
  PRF re;
};

}  // namespace

void cmd_ablate(const ExperimentConfig& cfg, const std::string& grid, const RunOptions& opt) {
  static const std::vector<std::string> known = {"tasks", "heads", "rsf", "fewshot", "all"};
  if (std::find(known.begin(), known.end(), grid) == known.end())
    throw ConfigError("unknown ablation grid '" + grid + "' (tasks, heads, rsf, fewshot, all)");
  const Workspace ws{cfg.out};
  const std::string stage = "ablate-" + grid;
  if (already_done(ws.ablate(), stage, cfg, opt)) return;
  const bool all = grid == "all";
  std::vector<GridRow> rows;
  std::vector<FewShotPoint> curves;
  DecodeConfig dc = cfg.decode;
  dc.ser = cfg.finetune.ser;

  for (std::uint64_t seed : cfg.seeds) {
    say(opt.log, "ablate: seed " + std::to_string(seed));
    const Corpora data = build_corpora(cfg, seed, opt.log);
    const auto train = head_of(data.finetune, cfg.finetune_train_docs);
    std::map<std::string, GeoModel> pre;
    auto pretrained = [&](const TaskToggles& t) -> const GeoModel& {
      auto it = pre.find(t.name());
      if (it == pre.end()) it = pre.emplace(t.name(), run_pretrain(cfg, data, t, seed, nullptr, opt.log)).first;
      return it->second;
    };
    auto score = [&](GeoModel& m, const DecodeConfig& d) { return evaluate(predict(m, data.test, d, opt.jobs), data.test).re; };
    const TaskToggles full{};

    if (all || grid == "tasks") {
      for (int mask = 0; mask < 8; ++mask) {
        TaskToggles t{true, (mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
        GeoModel m = run_finetune(pretrained(t), train, cfg.finetune, HeadInit::Pretrained, seed);
        rows.push_back({"tasks", t.name(), "pre-training tasks " + t.name(), seed, score(m, dc)});
      }
    }
    if (all || grid == "heads") {
      for (bool rfe : {false, true})
        for (HeadInit init : {HeadInit::RandomHeads, HeadInit::Pretrained}) {
          FinetuneConfig ft = cfg.finetune;
          ft.use_rfe = rfe;
          DecodeConfig d = dc;
          d.use_rfe = rfe;
          GeoModel m = run_finetune(pretrained(full), train, ft, init, seed);
          const std::string row = std::string(rfe ? "crp+rfe" : "crp") + (init == HeadInit::Pretrained ? "-pretrained" : "-random");
          rows.push_back({"heads", row, std::string(rfe ? "CRP+RFE" : "CRP") + " heads " +
                                            (init == HeadInit::Pretrained ? "pre-trained" : "re-drawn"),
                          seed, score(m, d)});
        }
    }
    if (all || grid == "rsf") {
      for (bool var : {false, true}) {
        FinetuneConfig ft = cfg.finetune;
        ft.variance_loss = var;
        GeoModel m = run_finetune(pretrained(full), train, ft, HeadInit::Pretrained, seed);
        for (bool rsf : {false, true}) {
          DecodeConfig d = dc;
          d.rsf = rsf;
          rows.push_back({"rsf", std::string(var ? "var" : "novar") + (rsf ? "+rsf" : ""),
                          std::string("variance=") + (var ? "on" : "off") + " rsf=" + (rsf ? "on" : "off"), seed, score(m, d)});
        }
      }
    }
    if (all || grid == "fewshot") {
      std::vector<Document> test = data.test;
      auto pts = few_shot_harness(pretrained(full), data.finetune, test, cfg.fewshot_shots, {seed}, cfg.finetune, dc);
      curves.insert(curves.end(), pts.begin(), pts.end());
    }
  }

  reset_dir(ws.ablate());
  MetricsReport summary;
  summary.meta = stamp_meta(cfg, stage);
  std::string csv = "grid,row,setting,seed,precision,recall,f1\n";
  std::map<std::pair<std::string, std::string>, std::pair<std::string, std::vector<double>>> agg;
  for (const GridRow& r : rows) {
    csv += r.grid + "," + r.row + "," + r.setting + "," + std::to_string(r.seed) + "," + prf_cols(r.re) + "\n";
    auto& a = agg[{r.grid, r.row}];
    a.first = r.setting;
    a.second.push_back(r.re.f1());
  }
  std::ostringstream text;
  text << "ablation grid '" << grid << "' over " << cfg.seeds.size() << " seed(s); mean RE F1\n";
  for (const auto& [key, v] : agg) {
    double m = 0;
    for (double x : v.second) m += x;
    m /= static_cast<double>(v.second.size());
    summary.extra[key.first + "." + key.second + ".f1"] = m;
    text << key.first << ' ' << key.second << "  " << v.first << "  " << fmt("%.4f", m) << '\n';
  }
  if (!rows.empty()) write_text(ws.ablate() / (grid + ".csv"), csv);
  if (!curves.empty()) {
    std::string c = "shots,variant,seed,precision,recall,f1\n";
    std::map<std::pair<std::size_t, std::string>, std::vector<double>> by;
    for (const auto& p : curves) {
      c += std::to_string(p.shots) + "," + p.variant + "," + std::to_string(p.seed) + "," + prf_cols(p.re) + "\n";
      by[{p.shots, p.variant}].push_back(p.re.f1());
    }
    write_text(ws.ablate() / "fewshot.csv", c);
    text << "few-shot mean RE F1\n";
    for (const auto& [k, v] : by) {
      double m = 0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      summary.extra["fewshot." + std::to_string(k.first) + "." + k.second + ".f1"] = m;
      text << "shots=" << k.first << ' ' << k.second << "  " << fmt("%.4f", m) << '\n';
    }
  }
  write_text(ws.ablate() / (grid + ".summary.txt"), text.str());
  write_text(ws.ablate() / (grid + ".metrics.txt"), summary.to_text());
  finish(ws.ablate(), stage, cfg);
  if (opt.log) *opt.log << text.str() << std::flush;
}

void cmd_report(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Workspace ws{cfg.out};
  std::vector<fs::path> files;
  for (const fs::path& dir : {ws.metrics(), ws.ablate()}) {
    if (!fs::is_directory(dir)) continue;
    for (const auto& e : fs::directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (e.path().extension() == ".txt" && name.find(".summary.") == std::string::npos) files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ArtifactError("no metrics in " + ws.root.string() + "; run `geolab evaluate`, `geolab probe` or `geolab ablate` first");
  std::set<std::string> hashes;
  std::vector<std::pair<fs::path, MetricsReport>> reports;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    MetricsReport r = MetricsReport::from_text(ss.str());
    hashes.insert(r.meta.count("config_hash") ? r.meta.at("config_hash") : "<none>");
    reports.emplace_back(f, std::move(r));
  }
  if (hashes.size() > 1) {
    std::string list;
    for (const auto& h : hashes) list += (list.empty() ? "" : ", ") + h;
    throw ArtifactError("report refuses metrics produced under different config hashes: " + list);
  }
  std::string csv = "file,key,value\n";
  std::ostringstream text;
  text << "run " << ws.root.string() << "  config " << *hashes.begin() << "  seed " << cfg.seed << '\n';
  for (const auto& [f, r] : reports) {
    const std::string name = f.filename().string();
    std::istringstream lines(r.to_text());
    for (std::string line; std::getline(lines, line);) {
      const auto eq = line.find(" = ");
      if (line.rfind("meta.", 0) == 0) continue;
      csv += name + "," + line.substr(0, eq) + "," + line.substr(eq + 3) + "\n";
    }
    text << '\n' << name << '\n';
    if (r.re.ngold) text << "  RE  P=" << fmt("%.4f", r.re.precision()) << " R=" << fmt("%.4f", r.re.recall()) << " F1=" << fmt("%.4f", r.re.f1()) << '\n';
    if (r.ser.ngold) text << "  SER F1=" << fmt("%.4f", r.ser.f1()) << '\n';
    if (r.probe) text << "  probe acc=" << fmt("%.4f", r.probe->accuracy) << " entropy=" << fmt("%.4f", r.probe->entropy) << " xent=" << fmt("%.4f", r.probe->xent) << '\n';
    for (const auto& [k, v] : r.extra) text << "  " << k << " = " << fmt("%.4f", v) << '\n';
  }
  // Pass through per-run curve data as is.
  fs::create_directories(ws.report());
  if (fs::exists(ws.ablate() / "fewshot.csv")) fs::copy_file(ws.ablate() / "fewshot.csv", ws.report() / "fewshot.csv", fs::copy_options::overwrite_existing);
  write_text(ws.report() / "metrics.csv", csv);
  write_text(ws.report() / "summary.txt", text.str());
  say(opt.log, "report: wrote " + (ws.report() / "summary.txt").string());
  if (opt.log) *opt.log << text.str() << std::flush;
}

void cmd_grad_check(const ExperimentConfig& cfg, const RunOptions& opt) {
  const auto entries = run_grad_checks(cfg.seed);
  double worst = 0;
  std::string csv = "check,max_rel_error,coordinates,worst\n";
  for (const auto& e : entries) {
    worst = std::max(worst, e.result.max_rel_error);
    csv += e.name + "," + fmt("%.3e", e.result.max_rel_error) + "," + std::to_string(e.result.coordinates) + "," + e.result.worst + "\n";
    say(opt.log, e.name + ": max rel error " + fmt("%.3e", e.result.max_rel_error) + " over " +
                     std::to_string(e.result.coordinates) + " coordinates");
  }
  write_text(fs::path(cfg.out) / "grad_check.csv", csv);
  if (worst >= 1e-4) throw NumericError("grad-check failed: worst relative error " + fmt("%.3e", worst) + " >= 1e-4");
}

}  // namespace geolab
