#include "fscal/diff.hpp"

#include <algorithm>
#include <cmath>

#include "fscal/error.hpp"

namespace fscal::diff {

// ---- ParameterStore -------------------------------------------------------

ParameterStore::ParameterStore(const ParameterStore& other)
    : params_(other.params_), index_(other.index_) {}

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  params_ = other.params_;
  index_ = other.index_;
  return *this;
}

Parameter& ParameterStore::add(const std::string& name, Matrix init) {
  if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.push_back({name, std::move(init), Matrix()});
  return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::size_t ParameterStore::scalar_count_with_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.name.rfind(prefix, 0) == 0) n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
}

// ---- Tape -----------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), false, nullptr, nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Parameter& p) {
  nodes_.push_back({p.value, Matrix(), true, &p, nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) {
    require(p.tape() == this, "op inputs belong to a different tape");
    needs = needs || nodes_[p.id()].needs_grad;
  }
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    if (!std::isfinite(value.data()[i])) throw DivergenceError("non-finite value in forward pass");
  }
  nodes_.push_back({std::move(value), Matrix(), needs, nullptr, needs ? std::move(backward) : nullptr});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& root) {
  require(root.tape() == this, "backward root belongs to a different tape");
  require(root.rows() == 1 && root.cols() == 1, "backward root must be a scalar");
  if (!nodes_[root.id()].needs_grad) return;
  nodes_[root.id()].grad = Matrix::Ones(1, 1);
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) {
        n.param->grad = n.grad;
      } else {
        n.param->grad += n.grad;
      }
    } else if (n.backward) {
      const Matrix g = std::move(n.grad);
      n.backward(*this, g);
    }
  }
}

// ---- primitives -----------------------------------------------------------

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) +
                            "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()) + ")");
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tape& t = *a.tape();
  return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt: trailing dimensions differ");
  Tape& t = *a.tape();
  return t.record(a.value() * b.value().transpose(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value());
    if (t.needs_grad(b)) t.accumulate(b, g.transpose() * a.value());
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  return t.record(a.value().transpose(), {a},
                  [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: bias must be 1 x cols");
  Tape& t = *a.tape();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var scale(Var a, double factor) {
  Tape& t = *a.tape();
  return t.record(a.value() * factor, {a},
                  [a, factor](Tape& t, const Matrix& g) { t.accumulate(a, g * factor); });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a, b, "hadamard");
  Tape& t = *a.tape();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale_rows(Var a, Var weights) {
  require(weights.cols() == 1 && weights.rows() == a.rows(), "scale_rows: weights must be R x 1");
  Tape& t = *a.tape();
  Matrix out = a.value().array().colwise() * weights.value().col(0).array();
  return t.record(std::move(out), {a, weights}, [a, weights](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) {
      Matrix ga = g.array().colwise() * weights.value().col(0).array();
      t.accumulate(a, ga);
    }
    if (t.needs_grad(weights)) {
      Matrix gw = g.cwiseProduct(a.value()).rowwise().sum();
      t.accumulate(weights, gw);
    }
  });
}

Var relu(Var a) {
  Tape& t = *a.tape();
  return t.record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, const Matrix& g) {
    Matrix mask = (a.value().array() > 0.0).cast<double>();
    t.accumulate(a, g.cwiseProduct(mask));
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape();
  Matrix y = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  Matrix dy = y.array() * (1.0 - y.array());
  return t.record(std::move(y), {a}, [a, dy = std::move(dy)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(dy));
  });
}

Var elementwise(Var a, Elementwise kind) {
  return kind == Elementwise::Relu ? relu(a) : sigmoid(a);
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out(r, c) = std::exp(m(r, c) - mx);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
  return out;
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  Matrix y = softmax_rows(a.value());
  Matrix y_copy = y;
  return t.record(std::move(y), {a}, [a, y = std::move(y_copy)](Tape& t, const Matrix& g) {
    Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix ga = y.array() * (g.colwise() - dot).array();
    t.accumulate(a, ga);
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const auto rows = a.rows();
  const auto cols = a.cols();
  return t.record(std::move(out), {a}, [a, rows, cols](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(rows, cols, g(0, 0)));
  });
}

Var mean_row_groups(Var a, int group) {
  require(group >= 1 && a.rows() % group == 0, "mean_row_groups: rows not divisible by group");
  Tape& t = *a.tape();
  const Eigen::Index groups = a.rows() / group;
  Matrix out = Matrix::Zero(groups, a.cols());
  for (Eigen::Index gi = 0; gi < groups; ++gi) {
    for (int k = 0; k < group; ++k) out.row(gi) += a.value().row(gi * group + k);
    out.row(gi) /= group;
  }
  return t.record(std::move(out), {a}, [a, group, groups](Tape& t, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (Eigen::Index gi = 0; gi < groups; ++gi) {
      for (int k = 0; k < group; ++k) ga.row(gi * group + k) = g.row(gi) / group;
    }
    t.accumulate(a, ga);
  });
}

Var select_rows(Var a, std::span<const int> rows) {
  Tape& t = *a.tape();
  std::vector<int> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a.rows(), "select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(idx[i]);
  }
  return t.record(std::move(out), {a}, [a, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(a, ga);
  });
}

namespace {

Var vstack2(Var a, Var b) {
  require(a.cols() == b.cols(), "vstack: column mismatch");
  Tape& t = *a.tape();
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  const Eigen::Index split = a.rows();
  return t.record(std::move(out), {a, b}, [a, b, split](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.topRows(split));
    if (t.needs_grad(b)) t.accumulate(b, g.bottomRows(g.rows() - split));
  });
}

}  // namespace

Var vstack(std::span<const Var> parts) {
  require(!parts.empty(), "vstack: nothing to stack");
  Var out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out = vstack2(out, parts[i]);
  return out;
}

Var hstack(std::initializer_list<Var> parts) {
  require(parts.size() >= 1, "hstack: nothing to stack");
  Tape& t = *parts.begin()->tape();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == parts.begin()->rows(), "hstack: row mismatch");
    cols += p.cols();
  }
  Matrix out(parts.begin()->rows(), cols);
  std::vector<Var> kept(parts);
  Eigen::Index at = 0;
  for (const Var& p : kept) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return t.record(std::move(out), parts, [kept](Tape& t, const Matrix& g) {
    Eigen::Index at = 0;
    for (const Var& p : kept) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Var linear(Var input, const LinearMap& map) {
  if (input.cols() != map.weight.rows()) {
    throw ContractViolation("linear: input width " + std::to_string(input.cols()) +
                            " != in_dim " + std::to_string(map.weight.rows()));
  }
  return add_row(matmul(input, map.weight), map.bias);
}

// ---- parameter helpers ----------------------------------------------------

void add_linear(ParameterStore& store, const std::string& prefix, int in_dim, int out_dim, Rng& rng,
                Init init) {
  Matrix w = Matrix::Zero(in_dim, out_dim);
  if (init == Init::Xavier) {
    const double bound = std::sqrt(6.0 / (in_dim + out_dim));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  }
  store.add(prefix + ".weight", std::move(w));
  store.add(prefix + ".bias", Matrix::Zero(1, out_dim));
}

LinearMap bind_linear(Tape& tape, ParameterStore& store, const std::string& prefix) {
  return {tape.param(store, prefix + ".weight"), tape.param(store, prefix + ".bias")};
}

std::size_t linear_param_count(int in_dim, int out_dim) {
  return static_cast<std::size_t>(in_dim) * out_dim + out_dim;
}

// ---- verification ---------------------------------------------------------

GradcheckResult gradcheck(const ScalarFn& fn, ParameterStore& store, double eps) {
  auto evaluate = [&]() {
    Tape tape;
    const double v = fn(tape).value()(0, 0);
    if (!std::isfinite(v)) throw DivergenceError("gradcheck: non-finite evaluation");
    return v;
  };

  store.zero_grad();
  {
    Tape tape;
    Var out = fn(tape);
    require(out.rows() == 1 && out.cols() == 1, "gradcheck: function must return a scalar");
    if (!std::isfinite(out.value()(0, 0))) throw DivergenceError("gradcheck: non-finite evaluation");
    tape.backward(out);
  }

  GradcheckResult result;
  for (Parameter& p : store) {
    const Matrix analytic = p.grad;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& x = p.value.data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = evaluate();
      x = saved - eps;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p.name + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  }
  return result;
}

// ---- optimizer ------------------------------------------------------------

void Adam::step(ParameterStore& store, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (Parameter& p : store) {
    if (p.grad.size() == 0) continue;
    auto [it, inserted] = moments_.try_emplace(p.name);
    auto& [m, v] = it->second;
    if (inserted) {
      m = Matrix::Zero(p.value.rows(), p.value.cols());
      v = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    m = config_.beta1 * m + (1.0 - config_.beta1) * p.grad;
    v = config_.beta2 * v + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config_.epsilon);
  }
}

}  // namespace fscal::diff
