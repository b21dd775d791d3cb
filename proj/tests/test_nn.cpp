#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "geolab/errors.hpp"
#include "geolab/nn/checkpoint.hpp"
#include "geolab/nn/grad_check.hpp"
#include "geolab/nn/layers.hpp"
#include "geolab/nn/ops.hpp"
#include "geolab/nn/optim.hpp"

using namespace geolab;
using namespace geolab::nn;

namespace {

Mat random_mat(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Var projected(Graph& g, Var out, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(out, g.constant(random_mat(rng, out.rows(), out.cols()))));
}

}  // namespace

TEST(Ops, AffineIdentity) {
  Graph g;
  Rng rng(1);
  const Mat x = random_mat(rng, 3, 4);
  const Var y = affine(g.constant(x), g.constant(Mat::Identity(4, 4)), g.constant(Mat::Zero(1, 4)));
  EXPECT_TRUE(y.value().isApprox(x));
}

TEST(Ops, SoftmaxEqualLogitsUniform) {
  Graph g;
  const Var p = softmax_rows(g.constant(Mat::Constant(2, 7, 3.5)));
  for (Eigen::Index i = 0; i < p.value().size(); ++i) EXPECT_NEAR(p.value().data()[i], 1.0 / 7, 1e-15);
}

TEST(Ops, SoftmaxRowsSumToOneAndShiftInvariant) {
  Graph g;
  Rng rng(2);
  const Mat x = random_mat(rng, 4, 6) * 20;
  const Mat p = softmax_rows(g.constant(x)).value();
  const Mat q = softmax_rows(g.constant((x.array() + 100.0).matrix())).value();
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
  EXPECT_TRUE(p.isApprox(q, 1e-12));
}

TEST(Ops, BilinearIdentityIsDot) {
  Graph g;
  Rng rng(3);
  const Mat x = random_mat(rng, 3, 5), y = random_mat(rng, 2, 5);
  const Mat r = bilinear_form(g.constant(x), g.constant(Mat::Identity(5, 5)), g.constant(y)).value();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(r(i, j), x.row(i).dot(y.row(j)), 1e-12);
}

TEST(Ops, LayerNormMoments) {
  Graph g;
  Rng rng(4);
  const Mat x = random_mat(rng, 5, 16) * 3;
  const Mat y = layer_norm(g.constant(x), g.constant(Mat::Ones(1, 16)), g.constant(Mat::Zero(1, 16))).value();
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(y.row(i).mean(), 0.0, 1e-12);
    EXPECT_NEAR((y.row(i).array().square()).mean(), 1.0, 1e-4);
  }
}

TEST(Ops, ShapeMismatchThrows) {
  Graph g;
  EXPECT_THROW(matmul(g.constant(Mat::Zero(2, 3)), g.constant(Mat::Zero(2, 3))), DimensionError);
  EXPECT_THROW(add(g.constant(Mat::Zero(2, 3)), g.constant(Mat::Zero(3, 2))), DimensionError);
  const std::vector<int> bad{5};
  EXPECT_THROW(embedding_lookup(g.constant(Mat::Zero(3, 2)), bad), DimensionError);
}

TEST(Ops, ClosedFormLosses) {
  Graph g;
  const std::vector<int> t{0, 4, 8};
  EXPECT_NEAR(cross_entropy(g.constant(Mat::Zero(3, 9)), t).item(), std::log(9.0), 1e-12);
  EXPECT_NEAR(bce_with_logits(g.constant(Mat::Zero(2, 3)), Mat::Ones(2, 3)).item(), std::log(2.0), 1e-12);
  Mat w = Mat::Zero(1, 2);
  w(0, 0) = 1;
  Mat tgt(1, 2);
  tgt << 1, 0;
  Mat logits(1, 2);
  logits << 2.0, -50.0;
  EXPECT_NEAR(bce_with_logits(g.constant(logits), tgt, w).item(), std::log1p(std::exp(-2.0)), 1e-12);
  Mat p(1, 2);
  p << 0.9, 0.5;
  EXPECT_NEAR(population_variance(g.constant(p)).item(), 0.04, 1e-12);
}

TEST(Ops, CrossEntropyGradientIsPMinusY) {
  Graph g;
  ParameterStore store;
  Rng rng(5);
  Parameter& p = store.add("logits", 1, 5, Init::Zeros, rng);
  const std::vector<int> t{2};
  Var loss = cross_entropy(g.param(p), t);
  g.backward(loss);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(p.grad(0, k), 0.2 - (k == 2 ? 1.0 : 0.0), 1e-12);
}

TEST(GradCheck, AffineBelow1e6) {
  ParameterStore store;
  Rng rng(6);
  store.add("x", 3, 4, Init::Normal, rng, 1.0);
  store.add("w", 4, 2, Init::Normal, rng, 1.0);
  store.add("b", 0, 2, Init::Normal, rng, 1.0);
  GradCheckOptions o;
  o.eps = 1e-5;
  const auto r = grad_check(
      store, [&](Graph& g) { return projected(g, affine(g.param(store.at("x")), g.param(store.at("w")), g.param(store.at("b"))), 9); }, o);
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  EXPECT_EQ(r.coordinates, 3u * 4 + 4 * 2 + 2);
}

TEST(GradCheck, RfeBlockBelow1e4) {
  ParameterStore store;
  Rng rng(7);
  EncoderLayer enc(store, "enc", 8, 2, 16, rng);
  CrossDecoderLayer dec(store, "dec", 8, 2, 16, rng);
  store.add("pos", 3, 8, Init::Normal, rng, 1.0);
  store.add("qry", 5, 8, Init::Normal, rng, 1.0);
  const auto r = grad_check(store, [&](Graph& g) {
    const Var mem = enc(g, store, g.param(store.at("pos")));
    return projected(g, dec(g, store, g.param(store.at("qry")), mem), 10);
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GradCheck, DetectsWrongGradient) {
  ParameterStore store;
  Rng rng(8);
  store.add("x", 2, 2, Init::Normal, rng, 1.0);
  const auto r = grad_check(store, [&](Graph& g) {
    const Var x = g.param(store.at("x"));
    // Forward x^2 with a deliberately wrong backward (x instead of 2x).
    Mat v = x.value().array().square().matrix();
    const Var y = g.make(v, true, [xid = x.id](Graph& gg, int self) {
      gg.grad(xid) += (gg.grad(self).array() * gg.value(xid).array()).matrix();
    });
    return sum(y);
  });
  EXPECT_GT(r.max_rel_error, 0.1);
}

TEST(Adam, ZeroGradientNoDecayLeavesParameters) {
  ParameterStore store;
  Rng rng(9);
  Parameter& p = store.add("w", 3, 3, Init::Normal, rng, 1.0);
  const Mat before = p.value;
  store.zero_grad();
  AdamConfig c;
  c.weight_decay = 0;
  for (int i = 0; i < 5; ++i) adam_step(store, c);
  EXPECT_EQ(p.value, before);
}

TEST(Adam, QuadraticDecreasesMonotonically) {
  ParameterStore store;
  Rng rng(10);
  Parameter& p = store.add("x", 1, 1, Init::Zeros, rng);
  p.value(0, 0) = 1.0;
  AdamConfig c;
  c.lr = 0.1;
  c.weight_decay = 0;
  double prev = 1.0;
  for (int i = 0; i < 100; ++i) {
    store.zero_grad();
    p.grad(0, 0) = 2 * p.value(0, 0);
    adam_step(store, c);
    const double loss = p.value(0, 0) * p.value(0, 0);
    // Steps are close to lr while the gradient keeps its sign, so x stays
    // positive (and the loss falls) for the first 9 steps from x = 1.
    if (i < 9) {
      EXPECT_LT(loss, prev) << "step " << i;
    }
    prev = loss;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Adam, FirstStepMagnitudeIsLr) {
  for (double grad : {1e-6, 0.3, 5.0, -40.0}) {
    ParameterStore store;
    Rng rng(11);
    Parameter& p = store.add("x", 1, 1, Init::Zeros, rng);
    p.grad(0, 0) = grad;
    AdamConfig c;
    c.lr = 0.01;
    c.weight_decay = 0;
    adam_step(store, c);
    const double step = std::abs(p.value(0, 0));
    EXPECT_GE(step, 0.9 * c.lr);
    EXPECT_LE(step, c.lr);
  }
}

TEST(Optim, LinearDecayAndClip) {
  EXPECT_DOUBLE_EQ(linear_decay_lr(1.0, 0, 10), 1.0);
  EXPECT_DOUBLE_EQ(linear_decay_lr(1.0, 5, 10), 0.5);
  EXPECT_DOUBLE_EQ(linear_decay_lr(1.0, 10, 10), 0.0);
  ParameterStore store;
  Rng rng(12);
  Parameter& p = store.add("x", 1, 2, Init::Zeros, rng);
  p.grad << 3, 4;
  EXPECT_DOUBLE_EQ(clip_grad_norm(store, 1.0), 5.0);
  EXPECT_NEAR(p.grad.norm(), 1.0, 1e-12);
}

TEST(Checkpoint, RoundTripBothDtypes) {
  ParameterStore store;
  Rng rng(13);
  store.add("a.w", 3, 4, Init::Normal, rng, 1.0);
  store.add("a.b", 0, 4, Init::Normal, rng, 1.0);
  const auto dir = std::filesystem::temp_directory_path();
  for (DType dt : {DType::F64, DType::F32}) {
    const auto path = dir / "geolab_ckpt_test.geol";
    write_checkpoint(path, snapshot(store, {{"k", "v"}}), dt);
    const Checkpoint c = read_checkpoint(path);
    EXPECT_EQ(c.manifest.at("k"), "v");
    ParameterStore other;
    Rng r2(99);
    other.add("a.w", 3, 4, Init::Zeros, r2);
    other.add("a.b", 0, 4, Init::Zeros, r2);
    load_into(other, c);
    const double tol = dt == DType::F64 ? 0.0 : 1e-6;
    EXPECT_TRUE((other.at("a.w").value - store.at("a.w").value).cwiseAbs().maxCoeff() <= tol);
    EXPECT_EQ(other.at("a.b").shape, store.at("a.b").shape);
    std::filesystem::remove(path);
  }
}

TEST(Checkpoint, RejectsMismatchAndCorruption) {
  ParameterStore store;
  Rng rng(14);
  store.add("w", 2, 2, Init::Normal, rng);
  const auto path = std::filesystem::temp_directory_path() / "geolab_ckpt_bad.geol";
  write_checkpoint(path, snapshot(store));
  ParameterStore wrong;
  wrong.add("w", 3, 2, Init::Zeros, rng);
  EXPECT_THROW(load_into(wrong, read_checkpoint(path)), Error);
  ParameterStore extra;
  extra.add("w", 2, 2, Init::Zeros, rng);
  extra.add("v", 2, 2, Init::Zeros, rng);
  EXPECT_THROW(load_into(extra, read_checkpoint(path)), Error);
  EXPECT_NO_THROW(load_into(extra, read_checkpoint(path), false));
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  EXPECT_THROW(read_checkpoint(path), Error);
  std::filesystem::remove(path);
}

TEST(Store, ReinitializeRestoresFreshValues) {
  ParameterStore store;
  Rng rng(15);
  Parameter& p = store.add("head.w", 4, 4, Init::Xavier, rng);
  p.value.setZero();
  p.step = 3;
  Rng r2(16);
  store.reinitialize("head.", r2);
  EXPECT_GT(p.value.cwiseAbs().sum(), 0.0);
  EXPECT_EQ(p.step, 0);
}
