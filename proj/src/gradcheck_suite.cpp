#include <functional>

#include "geolab/experiment.hpp"
#include "geolab/finetune.hpp"
#include "geolab/pretrain.hpp"

namespace geolab {

using namespace nn;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0, s);
  return m;
}

/// Scalar probe of a matrix output: sum(out .* R) with a fixed random R.
Var project(Graph& g, Var out, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(out, g.constant(random_mat(out.rows(), out.cols(), rng))));
}

Parameter& input(ParameterStore& s, const std::string& name, Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Parameter& p = s.add(name, static_cast<std::size_t>(r), static_cast<std::size_t>(c), Init::Zeros, rng);
  p.value = random_mat(r, c, rng, scale);
  return p;
}

/// Eight single-word segments on a loose grid with a few links, enough for
/// every pre-training task (DDE needs 40 ordered pairs).
Document tiny_document() {
  Document d;
  d.id = "tiny";
  const double xs[] = {50, 300, 50, 300, 50, 300, 600, 600};
  const double ys[] = {50, 50, 200, 210, 400, 390, 50, 400};
  for (int i = 0; i < 8; ++i) {
    TextSegment s;
    s.id = i;
    s.words.push_back({"w" + std::to_string(i), {xs[i], ys[i], xs[i] + 120, ys[i] + 30}});
    s.refresh_box();
    s.label = i % 2 ? EntityLabel::Answer : EntityLabel::Question;
    s.token_ids = {4 + i % 5};
    if (i == 6) {
      s.words.push_back({"x", {xs[i] + 125, ys[i], xs[i] + 180, ys[i] + 30}});
      s.refresh_box();
      s.token_ids.push_back(9);
    }
    d.segments.push_back(s);
  }
  d.links = {{0, 1}, {2, 3}, {4, 5}, {6, 5}};
  return d;
}

ModelConfig tiny_model_config() {
  ModelConfig mc;
  mc.encoder.vocab_size = 10;
  mc.encoder.hidden = 8;
  mc.encoder.layers = 1;
  mc.encoder.heads = 2;
  mc.encoder.ff = 8;
  mc.encoder.max_tokens = 12;
  mc.encoder.max_segments = 8;
  mc.encoder.coord_buckets = 11;
  mc.heads.relation_dim = 8;
  mc.heads.rfe_heads = 2;
  mc.heads.rfe_ff = 8;
  return mc;
}

/// Weights of a fresh tiny model are perturbed away from their symmetric
/// initial values (zero biases, unit gains) so every path carries gradient.
void jitter(ParameterStore& s, Rng& rng) {
  for (auto& [_, p] : s)
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += rng.normal(0, 0.3);
}

}  // namespace

std::vector<GradCheckEntry> run_grad_checks(std::uint64_t seed) {
  std::vector<GradCheckEntry> out;
  GradCheckOptions opts;
  opts.seed = seed;
  auto run = [&](const std::string& name, ParameterStore& s, const std::function<Var(Graph&)>& f) {
    out.push_back({name, grad_check(s, f, opts)});
  };
  Rng rng(seed);

  {
    ParameterStore s;
    input(s, "x", 3, 4, rng);
    Linear lin(s, "lin", 4, 5, rng);
    run("affine", s, [&](Graph& g) { return project(g, lin(g, s, g.param(s.at("x"))), 1); });
  }
  {
    ParameterStore s;
    input(s, "table", 6, 4, rng);
    const std::vector<int> ids{1, 3, 1, 0, 5};
    run("embedding_lookup", s, [&](Graph& g) { return project(g, embedding_lookup(g.param(s.at("table")), ids), 2); });
  }
  {
    ParameterStore s;
    input(s, "x", 3, 4, rng);
    input(s, "w", 4, 5, rng);
    input(s, "y", 2, 5, rng);
    run("bilinear_form", s, [&](Graph& g) {
      return project(g, bilinear_form(g.param(s.at("x")), g.param(s.at("w")), g.param(s.at("y"))), 3);
    });
  }
  {
    ParameterStore s;
    input(s, "x", 3, 6, rng);
    LayerNorm ln(s, "ln", 6, rng);
    jitter(s, rng);
    run("layer_norm", s, [&](Graph& g) { return project(g, ln(g, s, g.param(s.at("x"))), 4); });
  }
  {
    ParameterStore s;
    input(s, "x", 3, 5, rng);
    run("softmax", s, [&](Graph& g) { return project(g, softmax_rows(g.param(s.at("x"))), 5); });
    run("sigmoid", s, [&](Graph& g) { return project(g, sigmoid(g.param(s.at("x"))), 6); });
    run("gelu", s, [&](Graph& g) { return project(g, gelu(g.param(s.at("x"))), 7); });
    run("sum_mean", s, [&](Graph& g) {
      Var x = g.param(s.at("x"));
      return add(scale(sum(mul(x, x)), 0.5), mean(mul(x, sigmoid(x))));
    });
    run("population_variance", s, [&](Graph& g) { return population_variance(g.param(s.at("x"))); });
    const std::vector<int> t{0, 4, 2};
    run("cross_entropy", s, [&](Graph& g) { return cross_entropy(g.param(s.at("x")), t); });
    Rng r2(seed + 11);
    Mat y = (random_mat(3, 5, r2).array() > 0).cast<double>().matrix();
    Mat w = Mat::Ones(3, 5);
    w(1, 2) = 0;
    w(0, 0) = 0;
    run("bce_with_logits", s, [&](Graph& g) { return bce_with_logits(g.param(s.at("x")), y, w); });
  }
  {
    ParameterStore s;
    input(s, "a", 3, 4, rng);
    input(s, "b", 3, 2, rng);
    input(s, "c", 2, 4, rng);
    const std::vector<std::size_t> rows{2, 0, 2};
    const std::vector<IndexPair> cells{{0, 1}, {2, 3}, {1, 1}};
    const std::vector<IndexPair> pairs{{0, 1}, {2, 2}, {1, 0}, {0, 1}};
    run("shape_ops", s, [&](Graph& g) {
      Var a = g.param(s.at("a")), b = g.param(s.at("b")), c = g.param(s.at("c"));
      std::vector<Var> cols{a, b};
      std::vector<Var> rws{a, c};
      Var t = add(project(g, concat_cols(cols), 8), project(g, concat_rows(rws), 9));
      t = add(t, project(g, slice_cols(a, 1, 2), 10));
      t = add(t, project(g, reshape(a, 2, 6), 11));
      t = add(t, project(g, gather_rows(a, rows), 12));
      t = add(t, project(g, gather_elements(a, cells), 13));
      return add(t, project(g, pair_sum(a, matmul(b, g.param(s.at("c"))), pairs), 14));
    });
  }
  {
    ParameterStore s;
    input(s, "q", 3, 8, rng);
    input(s, "kv", 4, 8, rng);
    MultiHeadAttention mha(s, "mha", 8, 2, rng);
    jitter(s, rng);
    Mat mask = Mat::Zero(1, 4);
    mask(0, 3) = kMaskedLogit;
    run("multi_head_attention", s, [&](Graph& g) {
      return project(g, mha(g, s, g.param(s.at("q")), g.param(s.at("kv")), mask), 15);
    });
  }
  {
    ParameterStore s;
    input(s, "x", 3, 6, rng);
    FeedForward ff(s, "ff", 6, 10, rng);
    jitter(s, rng);
    run("feed_forward", s, [&](Graph& g) { return project(g, ff(g, s, g.param(s.at("x"))), 16); });
  }
  {
    ParameterStore s;
    input(s, "x", 4, 8, rng);
    EncoderLayer layer(s, "enc", 8, 2, 12, rng);
    jitter(s, rng);
    run("encoder_layer", s, [&](Graph& g) { return project(g, layer(g, s, g.param(s.at("x"))), 17); });
  }
  {
    ParameterStore s;
    input(s, "q", 3, 8, rng);
    input(s, "m", 2, 8, rng);
    CrossDecoderLayer layer(s, "dec", 8, 2, 12, rng);
    jitter(s, rng);
    run("cross_decoder_layer", s, [&](Graph& g) {
      return project(g, layer(g, s, g.param(s.at("q")), g.param(s.at("m"))), 18);
    });
  }

  // Full model pieces on a tiny configuration.
  const Document doc = tiny_document();
  const ModelConfig mc = tiny_model_config();
  auto fresh = [&](std::uint64_t k) {
    GeoModel m(mc, Rng::derive(seed, k));
    Rng jr(Rng::derive(seed, k, 1));
    jitter(m.store(), jr);
    return m;
  };
  const TokenInputs in = build_token_inputs(doc, mc.encoder, 11);
  {
    GeoModel m = fresh(1);
    run("text_layout_encoder", m.store(), [&](Graph& g) {
      EncodedDocument e = m.encoder().encode(g, m.store(), in);
      return add(project(g, e.tokens, 19), project(g, e.segments, 20));
    });
  }
  {
    GeoModel m = fresh(2);
    ParameterStore& s = m.store();
    input(s, "B", 5, 8, rng);
    const std::vector<IndexPair> pairs{{0, 1}, {3, 2}, {4, 0}};
    const std::vector<Triplet> trips{{0, 1, 2}, {4, 2, 3}};
    const std::vector<std::size_t> rows{1, 3};
    Rng r2(seed + 21);
    Mat r0 = (1.0 / (1.0 + (-random_mat(5, 5, r2).array()).exp())).matrix();
    run("crp_head", s, [&](Graph& g) { return project(g, m.heads().crp_logits(g, s, g.param(s.at("B"))), 21); });
    run("pair_features", s, [&](Graph& g) { return project(g, m.heads().pair_features(g, s, g.param(s.at("B")), pairs), 22); });
    run("rfe_head", s, [&](Graph& g) {
      Var B = g.param(s.at("B"));
      const std::vector<IndexPair> pos{{0, 1}, {2, 3}};
      return project(g, m.heads().rfe_logits(g, s, m.heads().pair_features(g, s, B, pos), m.heads().pair_features(g, s, B, pairs)), 23);
    });
    run("refine_relations", s, [&](Graph& g) { return project(g, m.heads().refine(g, s, g.param(s.at("B")), r0).logits, 24); });
    run("direction_head", s, [&](Graph& g) { return project(g, m.heads().direction_logits(g, s, g.param(s.at("B")), pairs), 25); });
    run("cit_head", s, [&](Graph& g) { return project(g, m.heads().cit_logits(g, s, g.param(s.at("B")), trips), 26); });
    run("mvlm_head", s, [&](Graph& g) { return project(g, m.heads().mvlm_logits(g, s, g.param(s.at("B")), rows), 27); });
    run("ser_head", s, [&](Graph& g) { return project(g, m.heads().ser_logits(g, s, g.param(s.at("B"))), 28); });
  }
  {
    GeoModel m = fresh(3);
    SamplingConfig sc;
    sc.mask_rate = 0.5;
    Rng lr(seed + 31);
    const GeoLabelSet labels = make_labels(doc, in.ids, mc.encoder.vocab_size, sc, lr);
    run("pretrain_loss", m.store(), [&](Graph& g) { return pretrain_loss(g, m, in, labels, TaskToggles{}).total; });
  }
  {
    GeoModel m = fresh(4);
    FinetuneConfig fc;
    const TokenInputs plain = build_token_inputs(doc, mc.encoder);
    run("finetune_loss", m.store(), [&](Graph& g) { return finetune_loss(g, m, plain, doc, fc).total; });
  }
  return out;
}

}  // namespace geolab
