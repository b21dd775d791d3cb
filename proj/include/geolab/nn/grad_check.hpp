#pragma once

#include <functional>
#include <string>

#include "geolab/nn/graph.hpp"

namespace geolab::nn {

struct GradCheckOptions {
  double eps = 1e-5;
  /// Check every coordinate when the store holds at most this many scalars,
  /// otherwise a random subsample of `sample` coordinates (at least 200).
  std::size_t exhaustive_limit = 4000;
  std::size_t sample = 400;
  std::uint64_t seed = 1;
  /// Denominator floor of the relative error.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t coordinates = 0;
  std::string worst;  ///< "name[index]" of the worst coordinate
};

/// Compares analytic gradients of the scalar built by `loss` against central
/// finite differences for the trainable parameters of `store`. Inputs to be
/// checked are registered as parameters. Relative error is
/// |a - n| / max(|a| + |n|, floor); a difference within the central
/// difference's rounding bound 4 eps_mach (|f+| + |f-|) / (2 eps) counts as
/// 0. Throws NumericError on non-finite values.
GradCheckResult grad_check(ParameterStore& store, const std::function<Var(Graph&)>& loss,
                           const GradCheckOptions& opts = {});

}  // namespace geolab::nn
