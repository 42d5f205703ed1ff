#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexki/nn/tensor.hpp"

namespace lexki::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  void zero_grad() {
    if (grad.shape() != value.shape()) {
      grad = Tensor<T>(value.shape(), std::vector<T>(value.numel(), T{0}));
    } else {
      grad.fill(T{0});
    }
  }
};

// Owns parameters in registration order. Addresses are stable, so modules may
// keep raw pointers into the store.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter<T>* add(std::string name, Tensor<T> value) {
    if (index_.count(name)) fail("InvariantError", "duplicate parameter name '", name, "'");
    auto p = std::make_unique<Parameter<T>>();
    p->name = std::move(name);
    p->value = std::move(value);
    p->zero_grad();
    index_[p->name] = params_.size();
    params_.push_back(std::move(p));
    return params_.back().get();
  }

  Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::vector<Parameter<T>*> all() const {
    std::vector<Parameter<T>*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
  }

  // Copies values by name from a store of another scalar type.
  template <typename U>
  void assign_from(const ParameterStore<U>& other) {
    for (std::size_t i = 0; i < other.size(); ++i) {
      Parameter<T>* p = find(other[i].name);
      if (!p) fail("InvariantError", "unknown parameter '", other[i].name, "'");
      if (p->value.shape() != other[i].value.shape()) {
        fail("ShapeMismatch", "parameter '", p->name, "' ", shape_str(p->value.shape()), " vs ",
             shape_str(other[i].value.shape()));
      }
      p->value = other[i].value.template cast<T>();
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename T>
class Tape;

template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Records operations in creation order, which is a valid topological order,
// so backward is a single reverse sweep. With recording off the tape only
// holds forward values.
template <typename T>
class Tape {
 public:
  using value_type = T;
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }

  void set_tracing(bool on) { tracing_ = on; }
  const std::vector<std::string>& trace() const noexcept { return trace_; }

  Var<T> constant(Tensor<T> v) { return push("constant", std::move(v), nullptr, nullptr); }

  Var<T> parameter(Parameter<T>& p) {
    auto it = leaves_.find(&p);
    if (it != leaves_.end()) return {this, it->second};
    Var<T> v = push("parameter", Tensor<T>{}, nullptr, &p);
    leaves_[&p] = v.id;
    return v;
  }

  // Appends an op result. The backward closure receives the node id and
  // reads the node's gradient through grad(id).
  Var<T> emit(const char* op, Tensor<T> value, BackwardFn fn) {
    if (!value.all_finite()) fail("NonFinite", "op '", op, "' produced NaN or Inf");
    return push(op, std::move(value), record_ ? std::move(fn) : BackwardFn{}, nullptr);
  }

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.param ? n.param->value : n.value;
  }

  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  Tensor<T>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
      const Tensor<T>& v = value(id);
      n.grad = Tensor<T>(v.shape(), std::vector<T>(v.numel(), T{0}));
    }
    return n.grad;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  // Accumulates d(loss)/d(param) into every parameter's grad buffer.
  void backward(Var<T> loss) {
    if (!record_) fail("InvariantError", "backward on a tape that is not recording");
    if (value(loss.id).numel() != 1) {
      fail("NotScalar", "loss has shape ", shape_str(value(loss.id).shape()));
    }
    grad(loss.id)[0] = T{1};
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (n.backward && !n.grad.empty()) n.backward(*this, id);
    }
    for (auto& [param, id] : leaves_) {
      Node& n = nodes_[id];
      if (n.grad.empty()) continue;
      if (param->grad.shape() != param->value.shape()) param->zero_grad();
      T* dst = param->grad.data();
      const T* src = n.grad.data();
      for (std::size_t i = 0; i < n.grad.numel(); ++i) dst[i] += src[i];
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(const char* op, Tensor<T> value, BackwardFn fn, Parameter<T>* param) {
    if (tracing_) {
      const Shape& s = param ? param->value.shape() : value.shape();
      trace_.push_back(std::string(op) + shape_str(s));
    }
    nodes_.push_back(Node{std::move(value), Tensor<T>{}, std::move(fn), param});
    return {this, nodes_.size() - 1};
  }

  bool record_;
  bool tracing_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<Parameter<T>*, std::size_t> leaves_;
  std::vector<std::string> trace_;
};

}  // namespace lexki::nn
