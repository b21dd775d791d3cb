// Experiment driver. Every subcommand reads an INI config (defaults when
// --config is omitted), runs one pipeline stage and writes artifacts under
// --out. Failures print one line to stderr:
//   geolab: error code=<code> subcommand=<name> message="<text>"

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "geolab/errors.hpp"
#include "geolab/experiment.hpp"

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

int exit_code(const std::string& code) {
  if (code == "config") return 2;
  if (code == "parse") return 3;
  if (code == "artifact") return 4;
  if (code == "numeric") return 5;
  if (code == "invalid-input") return 6;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geolab: geometric pre-training laboratory for form relation extraction"};
  app.require_subcommand(1);
  std::string config_path, out, init, grid = "all";
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  bool force = false;

  struct Cmd {
    const char* name;
    const char* help;
  };
  const Cmd cmds[] = {{"gen-corpus", "generate (or ingest) the pre-training, fine-tuning and test corpora"},
                      {"prepare-labels", "precompute and verify the geometric label cache"},
                      {"pretrain", "pre-train encoder and heads"},
                      {"finetune", "fine-tune SER and RE heads"},
                      {"evaluate", "score the fine-tuned model on the test split"},
                      {"probe", "direction probe on frozen pre-trained and initial encoders"},
                      {"ablate", "task, head and decoding ablation grids plus few-shot curves"},
                      {"grad-check", "finite-difference check of every layer and head"},
                      {"report", "collect metrics into CSV and a plain-text summary"}};
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config_path, "INI experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override experiment.seed");
    sub->add_option("--jobs", jobs, "worker threads for per-document work");
    sub->add_flag("--force", force, "rerun even when artifacts are up to date or stale");
    sub->add_option("--out", out, "artifact directory (overrides experiment.out)");
    if (std::string(c.name) == "finetune")
      sub->add_option("--init", init, "head initialization")->check(CLI::IsMember({"pretrained", "random-heads"}));
    if (std::string(c.name) == "ablate")
      sub->add_option("--grid", grid, "grid to run")->check(CLI::IsMember({"tasks", "heads", "rsf", "fewshot", "all"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "geolab: error code=usage subcommand=" << (app.get_subcommands().empty() ? "-" : app.get_subcommands()[0]->get_name())
              << " message=\"" << escape(e.what()) << "\"\n";
    return 64;
  }
  const std::string name = app.get_subcommands()[0]->get_name();
  try {
    geolab::ExperimentConfig cfg = config_path.empty() ? geolab::ExperimentConfig{} : geolab::load_config(config_path);
    auto* sub = app.get_subcommands()[0];
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--out")) cfg.out = out;
    if (sub->count("--jobs")) cfg.jobs = jobs;
    if (!init.empty()) cfg.init = init == "pretrained" ? geolab::HeadInit::Pretrained : geolab::HeadInit::RandomHeads;
    if (cfg.jobs == 0) throw geolab::ConfigError("--jobs must be positive");
    geolab::RunOptions opt{force, cfg.jobs, &std::cout};
    if (name == "gen-corpus") geolab::cmd_gen_corpus(cfg, opt);
    else if (name == "prepare-labels") geolab::cmd_prepare_labels(cfg, opt);
    else if (name == "pretrain") geolab::cmd_pretrain(cfg, opt);
    else if (name == "finetune") geolab::cmd_finetune(cfg, opt);
    else if (name == "evaluate") geolab::cmd_evaluate(cfg, opt);
    else if (name == "probe") geolab::cmd_probe(cfg, opt);
    else if (name == "ablate") geolab::cmd_ablate(cfg, grid, opt);
    else if (name == "grad-check") geolab::cmd_grad_check(cfg, opt);
    else if (name == "report") geolab::cmd_report(cfg, opt);
  } catch (const geolab::Error& e) {
    std::cerr << "geolab: error code=" << e.code() << " subcommand=" << name << " message=\"" << escape(e.what()) << "\"\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "geolab: error code=internal subcommand=" << name << " message=\"" << escape(e.what()) << "\"\n";
    return 1;
  }
  return 0;
}
