#include "geolab/nn/graph.hpp"

#include <numeric>
#include <sstream>

#include "geolab/errors.hpp"

namespace geolab::nn {

Tensor Tensor::from_matrix(const Mat& m, std::vector<std::size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(m.data(), m.data() + m.size());
  if (t.numel() != t.data.size()) throw DimensionError("tensor shape " + shape_string(t.shape) + " does not match " + shape_string(m));
  return t;
}

std::size_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Mat Tensor::to_matrix() const {
  if (shape.empty()) return Mat::Constant(1, 1, data.empty() ? 0.0 : data[0]);
  const std::size_t rows = shape.size() == 1 ? 1 : shape[0];
  const std::size_t cols = rows == 0 ? 0 : numel() / rows;
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::string shape_string(const Mat& m) { return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]"; }

Parameter& ParameterStore::add(const std::string& name, std::size_t rows, std::size_t cols, Init init, Rng& rng,
                               double scale) {
  if (params_.count(name)) throw InvalidInputError("duplicate parameter '" + name + "'");
  Parameter p;
  p.name = name;
  if (rows == 0) {
    p.shape = {cols};
    rows = 1;
  } else {
    p.shape = {rows, cols};
  }
  const auto r = static_cast<Eigen::Index>(rows), c = static_cast<Eigen::Index>(cols);
  p.value = Mat::Zero(r, c);
  p.grad = Mat::Zero(r, c);
  p.m = Mat::Zero(r, c);
  p.v = Mat::Zero(r, c);
  fill(p, init, scale, rng);
  inits_[name] = {init, scale};
  return params_.emplace(name, std::move(p)).first->second;
}

void ParameterStore::fill(Parameter& p, Init init, double scale, Rng& rng) {
  switch (init) {
    case Init::Zeros: p.value.setZero(); break;
    case Init::Ones: p.value.setOnes(); break;
    case Init::Normal:
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.normal(0.0, scale);
      break;
    case Init::Xavier: {
      const double fan = static_cast<double>(p.value.rows() + p.value.cols());
      const double bound = scale * std::sqrt(6.0 / fan);
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = rng.uniform(-bound, bound);
      break;
    }
  }
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidInputError("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidInputError("unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero();
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : params_) out.push_back(k);
  return out;
}

std::vector<std::string> ParameterStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, _] : params_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

void ParameterStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [k, p] : params_)
    if (k.rfind(prefix, 0) == 0) p.trainable = trainable;
}

void ParameterStore::reinitialize(const std::string& prefix, Rng& rng) {
  for (auto& [k, p] : params_) {
    if (k.rfind(prefix, 0) != 0) continue;
    const InitSpec& spec = inits_.at(k);
    fill(p, spec.init, spec.scale, rng);
    p.grad.setZero();
    p.m.setZero();
    p.v.setZero();
    p.step = 0;
  }
}

const Mat& Var::value() const { return graph->value(id); }

double Var::item() const {
  const Mat& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw DimensionError("item() on non-scalar " + shape_string(v));
  return v(0, 0);
}

Var Graph::constant(Mat value) { return make(std::move(value), false, nullptr); }

Var Graph::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{this, it->second};
  Var v = make(p.value, p.trainable, nullptr);
  nodes_[static_cast<std::size_t>(v.id)].param = &p;
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Graph::make(Mat value, bool needs_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Mat& Graph::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw InvalidInputError("backward on a foreign node");
  const Mat& lv = value(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) throw DimensionError("backward needs a 1x1 loss, got " + shape_string(lv));
  if (!needs_grad(loss.id)) return;
  grad(loss.id)(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) n.param->grad += n.grad;
  }
}

}  // namespace geolab::nn
