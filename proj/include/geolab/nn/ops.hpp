#pragma once

#include <span>
#include <utility>
#include <vector>

#include "geolab/nn/graph.hpp"

namespace geolab::nn {

using IndexPair = std::pair<std::size_t, std::size_t>;

// Differentiable primitives. Every op checks shapes and throws DimensionError
// naming both operands on mismatch.

Var matmul(Var a, Var b);     ///< a b
Var matmul_nt(Var a, Var b);  ///< a b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  ///< elementwise
Var scale(Var a, double s);
/// x + b with b a 1 x cols row broadcast over the rows of x.
Var add_bias(Var x, Var b);
/// x + c for a constant c of the same shape, or a 1 x cols row broadcast.
Var add_constant(Var x, const Mat& c);
/// x w + b: x [n x in], w [in x out], b [1 x out].
Var affine(Var x, Var w, Var b);
/// x w y^T: x [n x d], w [d x e], y [m x e].
Var bilinear_form(Var x, Var w, Var y);

/// Rows of `table` selected by ids; gradients scatter-add back.
Var embedding_lookup(Var table, std::span<const int> ids);
Var gather_rows(Var x, std::span<const std::size_t> rows);
/// Selected entries as a k x 1 column.
Var gather_elements(Var x, std::span<const IndexPair> entries);
/// Row p_i + q_j for every (i, j) in `pairs`.
Var pair_sum(Var p, Var q, std::span<const IndexPair> pairs);

Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
Var softmax_rows(Var x);
Var sigmoid(Var x);
/// Exact GELU, x * Phi(x).
Var gelu(Var x);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var x, Eigen::Index start, Eigen::Index len);
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);

Var sum(Var x);   ///< 1 x 1
Var mean(Var x);  ///< 1 x 1
/// Sum of 1 x 1 nodes.
Var add_scalars(std::span<const Var> terms);

/// Mean over rows of -log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const int> targets);
/// Weighted mean binary cross-entropy on logits; `weights` (same shape or
/// empty for all ones) masks entries out with 0.
Var bce_with_logits(Var logits, const Mat& targets, const Mat& weights = Mat());
/// Population variance of all entries, 1 x 1.
Var population_variance(Var x);

}  // namespace geolab::nn
