#include "geolab/nn/ops.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "geolab/errors.hpp"

namespace geolab::nn {

namespace {

Graph& graph_of(Var a) {
  if (!a.valid()) throw InvalidInputError("operation on an unbound Var");
  return *a.graph;
}

Graph& graph_of(Var a, Var b) {
  if (a.graph != b.graph) throw InvalidInputError("operands live on different graphs");
  return graph_of(a);
}

bool ng(Var v) { return v.graph->needs_grad(v.id); }

[[noreturn]] void mismatch(const char* op, const Mat& a, const Mat& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_same(const char* op, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(op, a, b);
}

void require_row(const char* op, const Mat& x, const Mat& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) mismatch(op, x, b);
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Mat& A = a.value();
  const Mat& B = b.value();
  if (A.cols() != B.rows()) mismatch("matmul", A, B);
  Mat C = A * B;
  return g.make(std::move(C), ng(a) || ng(b), [a, b](Graph& g, int self) {
    const Mat& dC = g.grad(self);
    if (ng(a)) g.grad(a.id).noalias() += dC * b.value().transpose();
    if (ng(b)) g.grad(b.id).noalias() += a.value().transpose() * dC;
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Mat& A = a.value();
  const Mat& B = b.value();
  if (A.cols() != B.cols()) mismatch("matmul_nt", A, B);
  Mat C = A * B.transpose();
  return g.make(std::move(C), ng(a) || ng(b), [a, b](Graph& g, int self) {
    const Mat& dC = g.grad(self);
    if (ng(a)) g.grad(a.id).noalias() += dC * b.value();
    if (ng(b)) g.grad(b.id).noalias() += dC.transpose() * a.value();
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same("add", a.value(), b.value());
  return g.make(a.value() + b.value(), ng(a) || ng(b), [a, b](Graph& g, int self) {
    const Mat& d = g.grad(self);
    if (ng(a)) g.grad(a.id) += d;
    if (ng(b)) g.grad(b.id) += d;
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same("sub", a.value(), b.value());
  return g.make(a.value() - b.value(), ng(a) || ng(b), [a, b](Graph& g, int self) {
    const Mat& d = g.grad(self);
    if (ng(a)) g.grad(a.id) += d;
    if (ng(b)) g.grad(b.id) -= d;
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same("mul", a.value(), b.value());
  return g.make(a.value().cwiseProduct(b.value()), ng(a) || ng(b), [a, b](Graph& g, int self) {
    const Mat& d = g.grad(self);
    if (ng(a)) g.grad(a.id) += d.cwiseProduct(b.value());
    if (ng(b)) g.grad(b.id) += d.cwiseProduct(a.value());
  });
}

Var scale(Var a, double s) {
  Graph& g = graph_of(a);
  return g.make(a.value() * s, ng(a), [a, s](Graph& g, int self) { g.grad(a.id) += g.grad(self) * s; });
}

Var add_bias(Var x, Var b) {
  Graph& g = graph_of(x, b);
  require_row("add_bias", x.value(), b.value());
  Mat y = x.value().rowwise() + b.value().row(0);
  return g.make(std::move(y), ng(x) || ng(b), [x, b](Graph& g, int self) {
    const Mat& d = g.grad(self);
    if (ng(x)) g.grad(x.id) += d;
    if (ng(b)) g.grad(b.id) += d.colwise().sum();
  });
}

Var add_constant(Var x, const Mat& c) {
  Graph& g = graph_of(x);
  const Mat& X = x.value();
  Mat y;
  if (c.rows() == X.rows() && c.cols() == X.cols()) {
    y = X + c;
  } else if (c.rows() == 1 && c.cols() == X.cols()) {
    y = X.rowwise() + c.row(0);
  } else {
    mismatch("add_constant", X, c);
  }
  return g.make(std::move(y), ng(x), [x](Graph& g, int self) { g.grad(x.id) += g.grad(self); });
}

Var affine(Var x, Var w, Var b) {
  Graph& g = graph_of(x, w);
  graph_of(x, b);
  const Mat& X = x.value();
  const Mat& W = w.value();
  if (X.cols() != W.rows()) mismatch("affine", X, W);
  if (b.value().rows() != 1 || b.value().cols() != W.cols()) mismatch("affine bias", W, b.value());
  Mat y = X * W;
  y.rowwise() += b.value().row(0);
  return g.make(std::move(y), ng(x) || ng(w) || ng(b), [x, w, b](Graph& g, int self) {
    const Mat& d = g.grad(self);
    if (ng(x)) g.grad(x.id).noalias() += d * w.value().transpose();
    if (ng(w)) g.grad(w.id).noalias() += x.value().transpose() * d;
    if (ng(b)) g.grad(b.id) += d.colwise().sum();
  });
}

Var bilinear_form(Var x, Var w, Var y) {
  Graph& g = graph_of(x, w);
  graph_of(x, y);
  const Mat& X = x.value();
  const Mat& W = w.value();
  const Mat& Y = y.value();
  if (X.cols() != W.rows()) mismatch("bilinear_form", X, W);
  if (Y.cols() != W.cols()) mismatch("bilinear_form", W, Y);
  Mat XW = X * W;
  Mat out = XW * Y.transpose();
  return g.make(std::move(out), ng(x) || ng(w) || ng(y), [x, w, y, XW = std::move(XW)](Graph& g, int self) {
    const Mat& d = g.grad(self);
    if (ng(x) || ng(w)) {
      Mat dY = d * y.value();  // [n x e]
      if (ng(x)) g.grad(x.id).noalias() += dY * w.value().transpose();
      if (ng(w)) g.grad(w.id).noalias() += x.value().transpose() * dY;
    }
    if (ng(y)) g.grad(y.id).noalias() += d.transpose() * XW;
  });
}

Var embedding_lookup(Var table, std::span<const int> ids) {
  Graph& g = graph_of(table);
  const Mat& T = table.value();
  Mat out(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= T.rows())
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[r]) + " outside table " + shape_string(T));
    out.row(static_cast<Eigen::Index>(r)) = T.row(ids[r]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return g.make(std::move(out), ng(table), [table, idx = std::move(idx)](Graph& g, int self) {
    const Mat& d = g.grad(self);
    Mat& dt = g.grad(table.id);
    for (std::size_t r = 0; r < idx.size(); ++r) dt.row(idx[r]) += d.row(static_cast<Eigen::Index>(r));
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Graph& g = graph_of(x);
  const Mat& X = x.value();
  Mat out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= static_cast<std::size_t>(X.rows()))
      throw DimensionError("gather_rows: row " + std::to_string(rows[r]) + " outside " + shape_string(X));
    out.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(rows[r]));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return g.make(std::move(out), ng(x), [x, idx = std::move(idx)](Graph& g, int self) {
    const Mat& d = g.grad(self);
    Mat& dx = g.grad(x.id);
    for (std::size_t r = 0; r < idx.size(); ++r) dx.row(static_cast<Eigen::Index>(idx[r])) += d.row(static_cast<Eigen::Index>(r));
  });
}

Var gather_elements(Var x, std::span<const IndexPair> entries) {
  Graph& g = graph_of(x);
  const Mat& X = x.value();
  Mat out(static_cast<Eigen::Index>(entries.size()), 1);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto [r, c] = entries[k];
    if (r >= static_cast<std::size_t>(X.rows()) || c >= static_cast<std::size_t>(X.cols()))
      throw DimensionError("gather_elements: entry outside " + shape_string(X));
    out(static_cast<Eigen::Index>(k), 0) = X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  std::vector<IndexPair> idx(entries.begin(), entries.end());
  return g.make(std::move(out), ng(x), [x, idx = std::move(idx)](Graph& g, int self) {
    const Mat& d = g.grad(self);
    Mat& dx = g.grad(x.id);
    for (std::size_t k = 0; k < idx.size(); ++k)
      dx(static_cast<Eigen::Index>(idx[k].first), static_cast<Eigen::Index>(idx[k].second)) += d(static_cast<Eigen::Index>(k), 0);
  });
}

Var pair_sum(Var p, Var q, std::span<const IndexPair> pairs) {
  Graph& g = graph_of(p, q);
  const Mat& P = p.value();
  const Mat& Q = q.value();
  if (P.cols() != Q.cols()) mismatch("pair_sum", P, Q);
  Mat out(static_cast<Eigen::Index>(pairs.size()), P.cols());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    if (i >= static_cast<std::size_t>(P.rows()) || j >= static_cast<std::size_t>(Q.rows()))
      throw DimensionError("pair_sum: pair index outside " + shape_string(P) + " / " + shape_string(Q));
    out.row(static_cast<Eigen::Index>(k)) = P.row(static_cast<Eigen::Index>(i)) + Q.row(static_cast<Eigen::Index>(j));
  }
  std::vector<IndexPair> idx(pairs.begin(), pairs.end());
  return g.make(std::move(out), ng(p) || ng(q), [p, q, idx = std::move(idx)](Graph& g, int self) {
    const Mat& d = g.grad(self);
    if (ng(p)) {
      Mat& dp = g.grad(p.id);
      for (std::size_t k = 0; k < idx.size(); ++k) dp.row(static_cast<Eigen::Index>(idx[k].first)) += d.row(static_cast<Eigen::Index>(k));
    }
    if (ng(q)) {
      Mat& dq = g.grad(q.id);
      for (std::size_t k = 0; k < idx.size(); ++k) dq.row(static_cast<Eigen::Index>(idx[k].second)) += d.row(static_cast<Eigen::Index>(k));
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Graph& g = graph_of(x, gamma);
  graph_of(x, beta);
  const Mat& X = x.value();
  require_row("layer_norm gamma", X, gamma.value());
  require_row("layer_norm beta", X, beta.value());
  const Eigen::Index n = X.rows(), d = X.cols();
  Mat xhat(n, d);
  Eigen::VectorXd inv(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    inv(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mu) * inv(r);
  }
  Mat y = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  y.rowwise() += beta.value().row(0);
  return g.make(std::move(y), ng(x) || ng(gamma) || ng(beta),
                [x, gamma, beta, xhat = std::move(xhat), inv = std::move(inv)](Graph& g, int self) {
                  const Mat& dy = g.grad(self);
                  if (ng(gamma)) g.grad(gamma.id) += dy.cwiseProduct(xhat).colwise().sum();
                  if (ng(beta)) g.grad(beta.id) += dy.colwise().sum();
                  if (ng(x)) {
                    Mat dxhat = (dy.array().rowwise() * gamma.value().row(0).array()).matrix();
                    Mat& dx = g.grad(x.id);
                    for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
                      const double m1 = dxhat.row(r).mean();
                      const double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                      dx.row(r).array() += inv(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                  }
                });
}

Var softmax_rows(Var x) {
  Graph& g = graph_of(x);
  const Mat& X = x.value();
  Mat y(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mx = X.row(r).maxCoeff();
    y.row(r) = (X.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  return g.make(y, ng(x), [x, y](Graph& g, int self) {
    const Mat& dy = g.grad(self);
    Mat& dx = g.grad(x.id);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = dy.row(r).dot(y.row(r));
      dx.row(r).array() += y.row(r).array() * (dy.row(r).array() - dot);
    }
  });
}

Var sigmoid(Var x) {
  Graph& g = graph_of(x);
  Mat y = x.value().unaryExpr([](double v) {
    return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  });
  return g.make(y, ng(x), [x, y](Graph& g, int self) {
    g.grad(x.id).array() += g.grad(self).array() * y.array() * (1.0 - y.array());
  });
}

Var gelu(Var x) {
  Graph& g = graph_of(x);
  const Mat& X = x.value();
  Mat y = X.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); });
  return g.make(std::move(y), ng(x), [x](Graph& g, int self) {
    const Mat& X = x.value();
    Mat d = X.unaryExpr([](double v) {
      const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
      const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
      return cdf + v * pdf;
    });
    g.grad(x.id).array() += g.grad(self).array() * d.array();
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Graph& g = graph_of(parts[0]);
  Eigen::Index cols = 0;
  bool needs = false;
  for (const Var& v : parts) {
    graph_of(parts[0], v);
    if (v.rows() != parts[0].rows()) mismatch("concat_cols", parts[0].value(), v.value());
    cols += v.cols();
    needs = needs || ng(v);
  }
  Mat out(parts[0].rows(), cols);
  Eigen::Index c = 0;
  for (const Var& v : parts) {
    out.middleCols(c, v.cols()) = v.value();
    c += v.cols();
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return g.make(std::move(out), needs, [in = std::move(in)](Graph& g, int self) {
    const Mat& d = g.grad(self);
    Eigen::Index c = 0;
    for (const Var& v : in) {
      if (ng(v)) g.grad(v.id) += d.middleCols(c, v.cols());
      c += v.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  Graph& g = graph_of(parts[0]);
  Eigen::Index rows = 0;
  bool needs = false;
  for (const Var& v : parts) {
    graph_of(parts[0], v);
    if (v.cols() != parts[0].cols()) mismatch("concat_rows", parts[0].value(), v.value());
    rows += v.rows();
    needs = needs || ng(v);
  }
  Mat out(rows, parts[0].cols());
  Eigen::Index r = 0;
  for (const Var& v : parts) {
    out.middleRows(r, v.rows()) = v.value();
    r += v.rows();
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return g.make(std::move(out), needs, [in = std::move(in)](Graph& g, int self) {
    const Mat& d = g.grad(self);
    Eigen::Index r = 0;
    for (const Var& v : in) {
      if (ng(v)) g.grad(v.id) += d.middleRows(r, v.rows());
      r += v.rows();
    }
  });
}

Var slice_cols(Var x, Eigen::Index start, Eigen::Index len) {
  Graph& g = graph_of(x);
  const Mat& X = x.value();
  if (start < 0 || len < 0 || start + len > X.cols())
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + len) +
                         ") outside " + shape_string(X));
  Mat out = X.middleCols(start, len);
  return g.make(std::move(out), ng(x), [x, start, len](Graph& g, int self) {
    g.grad(x.id).middleCols(start, len) += g.grad(self);
  });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols) {
  Graph& g = graph_of(x);
  const Mat& X = x.value();
  if (rows * cols != X.size())
    throw DimensionError("reshape: " + shape_string(X) + " cannot become [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
  Mat out = Eigen::Map<const Mat>(X.data(), rows, cols);
  return g.make(std::move(out), ng(x), [x](Graph& g, int self) {
    const Mat& d = g.grad(self);
    Mat& dx = g.grad(x.id);
    Eigen::Map<Mat>(dx.data(), d.rows(), d.cols()) += d;
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  return g.make(Mat::Constant(1, 1, x.value().sum()), ng(x),
                [x](Graph& g, int self) { g.grad(x.id).array() += g.grad(self)(0, 0); });
}

Var mean(Var x) {
  Graph& g = graph_of(x);
  const double n = static_cast<double>(x.value().size());
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return g.make(Mat::Constant(1, 1, x.value().sum() / n), ng(x),
                [x, n](Graph& g, int self) { g.grad(x.id).array() += g.grad(self)(0, 0) / n; });
}

Var add_scalars(std::span<const Var> terms) {
  if (terms.empty()) throw DimensionError("add_scalars: no terms");
  Graph& g = graph_of(terms[0]);
  double total = 0;
  bool needs = false;
  for (const Var& t : terms) {
    graph_of(terms[0], t);
    total += t.item();
    needs = needs || ng(t);
  }
  std::vector<Var> in(terms.begin(), terms.end());
  return g.make(Mat::Constant(1, 1, total), needs, [in = std::move(in)](Graph& g, int self) {
    const double d = g.grad(self)(0, 0);
    for (const Var& t : in)
      if (ng(t)) g.grad(t.id)(0, 0) += d;
  });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  Graph& g = graph_of(logits);
  const Mat& Z = logits.value();
  if (static_cast<std::size_t>(Z.rows()) != targets.size() || Z.rows() == 0)
    throw DimensionError("cross_entropy: " + shape_string(Z) + " logits for " + std::to_string(targets.size()) + " targets");
  Mat P(Z.rows(), Z.cols());
  double loss = 0;
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= Z.cols()) throw DimensionError("cross_entropy: target " + std::to_string(t) + " outside " + shape_string(Z));
    const double mx = Z.row(r).maxCoeff();
    P.row(r) = (Z.row(r).array() - mx).exp();
    const double s = P.row(r).sum();
    P.row(r) /= s;
    loss -= Z(r, t) - mx - std::log(s);
  }
  const double n = static_cast<double>(Z.rows());
  std::vector<int> tgt(targets.begin(), targets.end());
  return g.make(Mat::Constant(1, 1, loss / n), ng(logits),
                [logits, P = std::move(P), tgt = std::move(tgt), n](Graph& g, int self) {
                  const double d = g.grad(self)(0, 0) / n;
                  Mat& dz = g.grad(logits.id);
                  dz += P * d;
                  for (std::size_t r = 0; r < tgt.size(); ++r) dz(static_cast<Eigen::Index>(r), tgt[r]) -= d;
                });
}

Var bce_with_logits(Var logits, const Mat& targets, const Mat& weights) {
  Graph& g = graph_of(logits);
  const Mat& Z = logits.value();
  require_same("bce_with_logits", Z, targets);
  Mat W = weights.size() == 0 ? Mat::Ones(Z.rows(), Z.cols()) : weights;
  require_same("bce_with_logits weights", Z, W);
  const double total = W.sum();
  double loss = 0;
  for (Eigen::Index i = 0; i < Z.size(); ++i) {
    const double z = Z.data()[i], y = targets.data()[i], w = W.data()[i];
    if (w == 0) continue;
    loss += w * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
  }
  if (total > 0) loss /= total;
  return g.make(Mat::Constant(1, 1, loss), ng(logits) && total > 0,
                [logits, targets, W = std::move(W), total](Graph& g, int self) {
                  const double d = g.grad(self)(0, 0) / total;
                  const Mat& Z = logits.value();
                  Mat& dz = g.grad(logits.id);
                  for (Eigen::Index i = 0; i < Z.size(); ++i) {
                    const double z = Z.data()[i];
                    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                    dz.data()[i] += d * W.data()[i] * (s - targets.data()[i]);
                  }
                });
}

Var population_variance(Var x) {
  Graph& g = graph_of(x);
  const Mat& X = x.value();
  const double n = static_cast<double>(X.size());
  if (n == 0) throw DimensionError("population_variance of an empty tensor");
  const double mu = X.mean();
  const double var = (X.array() - mu).square().sum() / n;
  return g.make(Mat::Constant(1, 1, var), ng(x), [x, mu, n](Graph& g, int self) {
    const double d = g.grad(self)(0, 0);
    g.grad(x.id).array() += d * 2.0 * (x.value().array() - mu) / n;
  });
}

}  // namespace geolab::nn
