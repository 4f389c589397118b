#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every value produced during one forward pass; calling
// backward() on a 1x1 node walks the tape in reverse and accumulates
// gradients into the Parameters that were bound as leaves. Tapes are
// single-use and cheap to build, so every forward pass gets a fresh one.

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fscal/rng.hpp"

namespace fscal::diff {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Named parameters in insertion order. References stay valid for the
/// store's lifetime.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter& add(const std::string& name, Matrix init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::size_t scalar_count_with_prefix(const std::string& prefix) const;

  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Var constant(Matrix value);
  Var param(Parameter& p);
  Var param(ParameterStore& store, const std::string& name) { return param(store.get(name)); }

  /// Records an op output. `backward` receives dL/d(out) and must call
  /// accumulate() for each parent that needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);

  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }
  void accumulate(const Var& v, const Matrix& g);
  const Matrix& value(int id) const { return nodes_[id].value; }

  /// Seeds d(root)/d(root) = 1 and back-propagates into bound Parameters.
  void backward(const Var& root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var row);      // broadcast 1xN row over every row of a
Var scale(Var a, double factor);
Var hadamard(Var a, Var b);
Var scale_rows(Var a, Var weights);  // a (RxC) times weights (Rx1) per row
Var relu(Var a);
Var sigmoid(Var a);
Var softmax_rows(Var a);
Var sum(Var a);  // 1x1
Var mean_row_groups(Var a, int group);  // (G*group)xC -> GxC
Var select_rows(Var a, std::span<const int> rows);
Var vstack(std::span<const Var> parts);  // concatenate along rows
Var hstack(std::initializer_list<Var> parts);  // concatenate along columns

enum class Elementwise { Relu, Sigmoid };
Var elementwise(Var a, Elementwise kind);

struct LinearMap {
  Var weight;  // in x out
  Var bias;    // 1 x out
};

Var linear(Var input, const LinearMap& map);

/// Numerically stable softmax of each row of a plain matrix.
Matrix softmax_rows(const Matrix& m);

// ---- parameter helpers ----------------------------------------------------

enum class Init { Xavier, Zero };

/// Registers `<prefix>.weight` (in x out) and `<prefix>.bias` (1 x out).
void add_linear(ParameterStore& store, const std::string& prefix, int in_dim, int out_dim, Rng& rng,
                Init init = Init::Xavier);

LinearMap bind_linear(Tape& tape, ParameterStore& store, const std::string& prefix);

std::size_t linear_param_count(int in_dim, int out_dim);

// ---- verification ---------------------------------------------------------

using ScalarFn = std::function<Var(Tape&)>;

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Central finite differences against the tape gradient, over every
/// scalar of every parameter in `store`. Relative error is
/// |a - n| / max(1, |a|, |n|).
GradcheckResult gradcheck(const ScalarFn& fn, ParameterStore& store, double eps = 1e-5);

// ---- optimizer ------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParameterStore& store, double lr);
  long long steps() const { return t_; }

 private:
  AdamConfig config_;
  long long t_ = 0;
  std::map<std::string, std::pair<Matrix, Matrix>> moments_;
};

}  // namespace fscal::diff
