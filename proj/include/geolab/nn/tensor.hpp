#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geolab/rng.hpp"

namespace geolab::nn {

/// Row-major dense matrix used for every value and gradient on the tape.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shaped array with flat row-major storage (checkpoint payloads, exports).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Tensor from_matrix(const Mat& m, std::vector<std::size_t> shape);
  /// View as rows = shape[0], cols = product of the remaining extents.
  Mat to_matrix() const;
  std::size_t numel() const;
};

std::string shape_string(const std::vector<std::size_t>& shape);
std::string shape_string(const Mat& m);

/// Trainable array plus its gradient and AdamW moments. Biases are 1 x n.
struct Parameter {
  std::string name;
  std::vector<std::size_t> shape;
  Mat value;
  Mat grad;
  Mat m;
  Mat v;
  long step = 0;
  bool trainable = true;
};

enum class Init { Zeros, Ones, Normal, Xavier };

/// Named parameters in lexicographic order, so iteration is deterministic.
class ParameterStore {
 public:
  /// Registers a parameter of shape [rows, cols] (or [cols] when rows == 0,
  /// stored as 1 x cols). Throws on a duplicate name.
  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols, Init init, Rng& rng,
                 double scale = 0.02);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;
  std::vector<std::string> names() const;
  /// Names starting with `prefix`.
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
  void set_trainable(const std::string& prefix, bool trainable);
  /// Re-draws the listed parameters with their original initializer and
  /// clears optimizer state.
  void reinitialize(const std::string& prefix, Rng& rng);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  struct InitSpec {
    Init init;
    double scale;
  };
  std::map<std::string, Parameter> params_;
  std::map<std::string, InitSpec> inits_;
  static void fill(Parameter& p, Init init, double scale, Rng& rng);
};

}  // namespace geolab::nn
