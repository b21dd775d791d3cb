#include "geolab/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geolab/errors.hpp"

namespace geolab::nn {

GradCheckResult grad_check(ParameterStore& store, const std::function<Var(Graph&)>& loss,
                           const GradCheckOptions& opts) {
  if (!(opts.eps >= 1e-6 && opts.eps <= 1e-4)) throw InvalidInputError("grad_check eps must lie in [1e-6, 1e-4]");
  store.zero_grad();
  {
    Graph g;
    Var l = loss(g);
    if (!std::isfinite(l.item())) throw NumericError("grad_check: non-finite loss");
    g.backward(l);
  }

  struct Coord {
    Parameter* p;
    Eigen::Index i;
  };
  std::vector<Coord> coords;
  for (auto& [_, p] : store) {
    if (!p.trainable) continue;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) coords.push_back({&p, i});
  }
  if (coords.size() > opts.exhaustive_limit) {
    Rng rng(opts.seed);
    const std::size_t k = std::max<std::size_t>(opts.sample, 200);
    auto pick = rng.sample_without_replacement(coords.size(), k);
    std::sort(pick.begin(), pick.end());
    std::vector<Coord> sub;
    for (auto idx : pick) sub.push_back(coords[idx]);
    coords = std::move(sub);
  }

  auto eval = [&]() {
    Graph g;
    const double v = loss(g).item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss under perturbation");
    return v;
  };

  GradCheckResult res;
  for (const Coord& c : coords) {
    double& x = c.p->value.data()[c.i];
    const double saved = x;
    x = saved + opts.eps;
    const double fp = eval();
    x = saved - opts.eps;
    const double fm = eval();
    x = saved;
    const double numeric = (fp - fm) / (2.0 * opts.eps);
    const double analytic = c.p->grad.data()[c.i];
    if (!std::isfinite(analytic)) throw NumericError("grad_check: non-finite analytic gradient in " + c.p->name);
    // Differences inside the rounding noise of the two loss evaluations carry
    // no information, e.g. at coordinates whose true gradient is exactly 0.
    const double noise = 4.0 * std::numeric_limits<double>::epsilon() * (std::abs(fp) + std::abs(fm)) / (2.0 * opts.eps);
    const double diff = std::abs(analytic - numeric);
    const double rel = diff <= noise ? 0.0 : diff / std::max(std::abs(analytic) + std::abs(numeric), opts.floor);
    ++res.coordinates;
    if (rel > res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst = c.p->name + "[" + std::to_string(c.i) + "]";
    }
  }
  store.zero_grad();
  return res;
}

}  // namespace geolab::nn
