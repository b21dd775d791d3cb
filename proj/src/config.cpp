#include "geolab/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "geolab/errors.hpp"

namespace geolab {

namespace {

struct Field {
  std::string section, key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void bad(const std::string& key, const std::string& v, const char* what) {
  throw ConfigError(key + ": '" + v + "' is not " + what);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad(key, v, "a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) bad(key, v, "a non-negative integer");
  try {
    return std::stoull(v);
  } catch (const std::logic_error&) {
    bad(key, v, "a non-negative integer");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad(key, v, "a boolean");
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

template <typename T>
std::vector<T> split(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) bad(key, v, "a comma-separated integer list");
    out.push_back(static_cast<T>(to_u64(key, item.substr(b, e - b + 1))));
  }
  if (out.empty()) bad(key, v, "a non-empty list");
  return out;
}

std::vector<Field> fields(ExperimentConfig& c) {
  std::vector<Field> f;
  auto num = [&](const char* s, const char* k, auto& ref) {
    using T = std::remove_reference_t<decltype(ref)>;
    const std::string full = std::string(s) + "." + k;
    if constexpr (std::is_same_v<T, double>) {
      f.push_back({s, k, [&ref] { return fmt_double(ref); }, [&ref, full](const std::string& v) { ref = to_double(full, v); }});
    } else if constexpr (std::is_same_v<T, bool>) {
      f.push_back({s, k, [&ref] { return std::string(ref ? "true" : "false"); },
                   [&ref, full](const std::string& v) { ref = to_bool(full, v); }});
    } else {
      f.push_back({s, k, [&ref] { return std::to_string(ref); },
                   [&ref, full](const std::string& v) { ref = static_cast<T>(to_u64(full, v)); }});
    }
  };
  num("experiment", "seed", c.seed);
  f.push_back({"experiment", "out", [&c] { return c.out.string(); }, [&c](const std::string& v) { c.out = v; }});
  num("experiment", "jobs", c.jobs);
  f.push_back({"experiment", "seeds", [&c] { return join(c.seeds); },
               [&c](const std::string& v) { c.seeds = split<std::uint64_t>("experiment.seeds", v); }});

  auto& g = c.generator;
  num("corpus", "pretrain_docs", c.pretrain_docs);
  num("corpus", "finetune_docs", c.finetune_docs);
  num("corpus", "test_docs", c.test_docs);
  num("corpus", "segmentation_prob", c.segmentation_prob);
  f.push_back({"corpus", "source", [&c] { return c.source; }, [&c](const std::string& v) {
                 if (v != "synthetic" && v != "funsd") bad("corpus.source", v, "'synthetic' or 'funsd'");
                 c.source = v;
               }});
  f.push_back({"corpus", "funsd_train", [&c] { return c.funsd_train.string(); }, [&c](const std::string& v) { c.funsd_train = v; }});
  f.push_back({"corpus", "funsd_test", [&c] { return c.funsd_test.string(); }, [&c](const std::string& v) { c.funsd_test = v; }});
  num("corpus", "flip_links", c.flip_links);
  auto inum = [&](const char* k, int& ref) {
    const std::string full = std::string("corpus.") + k;
    f.push_back({"corpus", k, [&ref] { return std::to_string(ref); },
                 [&ref, full](const std::string& v) { ref = static_cast<int>(to_u64(full, v)); }});
  };
  inum("grid_cols", g.grid_cols);
  inum("grid_rows", g.grid_rows);
  inum("min_pairs", g.min_pairs);
  inum("max_pairs", g.max_pairs);
  num("corpus", "block_fill_rate", g.block_fill_rate);
  num("corpus", "header_rate", g.header_rate);
  num("corpus", "vertical_value_rate", g.vertical_value_rate);
  num("corpus", "multi_father_rate", g.multi_father_rate);
  num("corpus", "multi_son_rate", g.multi_son_rate);
  num("corpus", "other_rate", g.other_rate);
  num("corpus", "colon_rate", g.colon_rate);
  num("corpus", "jitter", g.jitter);
  num("corpus", "shuffle_segments", g.shuffle_segments);
  num("corpus", "page_width", g.page_width);
  num("corpus", "page_height", g.page_height);
  num("corpus", "key_pool", g.key_pool);
  num("corpus", "value_pool", g.value_pool);
  num("corpus", "header_pool", g.header_pool);
  num("corpus", "pool_overlap", g.pool_overlap);
  num("corpus", "vocab_seed", g.vocab_seed);

  auto& e = c.model.encoder;
  auto& h = c.model.heads;
  num("model", "hidden", e.hidden);
  num("model", "layers", e.layers);
  num("model", "heads", e.heads);
  num("model", "ff", e.ff);
  num("model", "max_tokens", e.max_tokens);
  num("model", "coord_buckets", e.coord_buckets);
  num("model", "relation_dim", h.relation_dim);
  num("model", "rfe_heads", h.rfe_heads);
  num("model", "rfe_ff", h.rfe_ff);
  num("model", "positive_cap", h.positive_cap);

  auto& p = c.pretrain;
  num("pretrain", "mvlm", p.tasks.mvlm);
  num("pretrain", "ddm", p.tasks.ddm);
  num("pretrain", "dde", p.tasks.dde);
  num("pretrain", "cit", p.tasks.cit);
  num("pretrain", "epochs", p.epochs);
  num("pretrain", "batch_docs", p.batch_docs);
  num("pretrain", "lr", p.adam.lr);
  num("pretrain", "weight_decay", p.adam.weight_decay);
  num("pretrain", "clip", p.clip);
  num("pretrain", "verify", p.verify);
  num("pretrain", "ddm_anchors", p.sampling.ddm_anchors);
  num("pretrain", "ddm_partners", p.sampling.ddm_partners);
  num("pretrain", "dde_positive", p.sampling.dde_positive);
  num("pretrain", "dde_sample", p.sampling.dde_sample);
  num("pretrain", "dde_ratio", p.sampling.dde_ratio);
  num("pretrain", "dde_threshold", p.sampling.dde_threshold);
  num("pretrain", "cit_triplets", p.sampling.cit_triplets);
  num("pretrain", "mask_rate", p.sampling.mask_rate);

  auto& t = c.finetune;
  num("finetune", "epochs", t.epochs);
  num("finetune", "batch_docs", t.batch_docs);
  num("finetune", "lr", t.adam.lr);
  num("finetune", "weight_decay", t.adam.weight_decay);
  num("finetune", "clip", t.clip);
  num("finetune", "variance_loss", t.variance_loss);
  num("finetune", "variance_weight", t.variance_weight);
  num("finetune", "use_rfe", t.use_rfe);
  num("finetune", "ser", t.ser);
  num("finetune", "train_docs", c.finetune_train_docs);
  f.push_back({"finetune", "init", [&c] { return std::string(c.init == HeadInit::Pretrained ? "pretrained" : "random-heads"); },
               [&c](const std::string& v) {
                 if (v == "pretrained") c.init = HeadInit::Pretrained;
                 else if (v == "random-heads") c.init = HeadInit::RandomHeads;
                 else bad("finetune.init", v, "'pretrained' or 'random-heads'");
               }});

  num("decode", "rsf", c.decode.rsf);
  num("decode", "tau", c.decode.tau);
  num("decode", "geo_filter_factor", c.decode.geo_filter_factor);

  num("probe", "pairs_per_doc", c.probe.pairs_per_doc);
  num("probe", "steps", c.probe.steps);
  num("probe", "lr", c.probe.lr);
  num("probe", "train_docs", c.probe_train_docs);
  num("probe", "test_docs", c.probe_test_docs);

  f.push_back({"fewshot", "shots", [&c] { return join(c.fewshot_shots); },
               [&c](const std::string& v) { c.fewshot_shots = split<std::size_t>("fewshot.shots", v); }});
  return f;
}

void check(const ExperimentConfig& c) {
  if (c.segmentation_prob < 0 || c.segmentation_prob > 1) throw ConfigError("corpus.segmentation_prob must lie in [0, 1]");
  if (c.decode.tau < 0) throw ConfigError("decode.tau must be non-negative");
  if (c.jobs == 0) throw ConfigError("experiment.jobs must be positive");
  c.pretrain.sampling.validate();
  if (c.source == "funsd" && (c.funsd_train.empty() || c.funsd_test.empty()))
    throw ConfigError("corpus.source = funsd needs corpus.funsd_train and corpus.funsd_test");
  try {
    c.generator.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("corpus: ") + e.what());
  }
}

}  // namespace

std::string ExperimentConfig::canonical() const {
  ExperimentConfig copy = *this;
  std::vector<std::string> lines;
  for (const Field& f : fields(copy)) {
    // Output location and worker count do not change results.
    if (f.section == "experiment" && (f.key == "out" || f.key == "jobs")) continue;
    lines.push_back(f.section + "." + f.key + "=" + f.get());
  }
  std::sort(lines.begin(), lines.end());
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(canonical()); }

ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig c;
  auto fs = fields(c);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' must be inside a [section]");
    for (const auto& [key, value] : body) {
      auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == fs.end()) throw ConfigError("unknown setting '" + section + "." + key + "'");
      it->set(value.data());
    }
  }
  check(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::string out, section;
  for (const Field& f : fields(copy)) {
    if (f.section != section) {
      out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.get() + "\n";
  }
  return out;
}

}  // namespace geolab
