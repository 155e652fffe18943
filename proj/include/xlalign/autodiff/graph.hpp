#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "xlalign/autodiff/tensor.hpp"
#include "xlalign/common/digest.hpp"
#include "xlalign/common/error.hpp"

namespace xlalign::ad {

template <class T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
};

/// Named parameters in sorted-name order. A frozen store refuses mutable
/// access; its values can still be read by any number of graphs.
template <class T>
class ParameterStore {
 public:
  Parameter<T>& add(const std::string& name, Tensor<T> init) {
    ensure_mutable("add");
    if (params_.count(name)) throw ValidationError("parameter '" + name + "' already registered");
    Tensor<T> grad(init.shape());
    return params_[name] = Parameter<T>{std::move(init), std::move(grad)};
  }

  const Parameter<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
  }

  Parameter<T>& mut(const std::string& name) {
    ensure_mutable("mutate '" + name + "'");
    auto it = params_.find(name);
    if (it == params_.end()) throw ValidationError("unknown parameter '" + name + "'");
    return it->second;
  }

  const std::map<std::string, Parameter<T>>& all() const { return params_; }
  std::map<std::string, Parameter<T>>& all_mut() {
    ensure_mutable("mutate");
    return params_;
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.grad.fill(T{0});
  }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
  }

  /// SHA-256 over names, shapes and raw values in sorted-name order.
  std::string digest() const {
    Sha256 h;
    for (const auto& [name, p] : params_) {
      h.update(name);
      h.update(shape_str(p.value.shape()));
      h.update(p.value.data(), p.value.size() * sizeof(T));
    }
    return h.hex();
  }

 private:
  void ensure_mutable(const std::string& what) const {
    if (frozen_) throw ContractError("parameter store is frozen: cannot " + what);
  }

  std::map<std::string, Parameter<T>> params_;
  bool frozen_ = false;
};

template <class T>
class Graph;

/// Handle to a node of a Graph.
template <class T>
struct Var {
  Graph<T>* graph = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return graph->value(id); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return graph->requires_grad(id); }
  /// Gradient after backward(); zeros if the node received none.
  Tensor<T> grad() const { return graph->grad_or_zero(id); }
};

/// Tape of operations in creation order, which is a topological order.
/// backward() walks it once in reverse, accumulating gradients additively
/// across fan-out, then adds leaf gradients into their parameters.
template <class T>
class Graph {
 public:
  using Backward = std::function<void()>;

  explicit Graph(bool check_finite = false) : check_finite_(check_finite) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr, nullptr, "constant"); }

  /// Trainable leaf; gradients flow into p.grad.
  Var<T> parameter(Parameter<T>& p) {
    auto it = leaves_.find(&p);
    if (it != leaves_.end()) return {this, it->second};
    Var<T> v = push(p.value, true, nullptr, &p, "parameter");
    leaves_[&p] = v.id;
    return v;
  }

  /// Read-only leaf (frozen models); treated as a constant.
  Var<T> parameter(const Parameter<T>& p) { return constant(p.value); }

  /// Records an op node. `fn` runs during backward when the node requires grad.
  Var<T> op(Tensor<T> value, std::initializer_list<Var<T>> inputs, Backward fn, const char* name) {
    bool rg = false;
    for (const auto& in : inputs) rg = rg || requires_grad(in.id);
    return push(std::move(value), rg, rg ? std::move(fn) : Backward{}, nullptr, name);
  }
  Var<T> op(Tensor<T> value, const std::vector<Var<T>>& inputs, Backward fn, const char* name) {
    bool rg = false;
    for (const auto& in : inputs) rg = rg || requires_grad(in.id);
    return push(std::move(value), rg, rg ? std::move(fn) : Backward{}, nullptr, name);
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Mutable gradient buffer, allocated on first use.
  Tensor<T>& grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }
  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() == nodes_[id].value.size() && nodes_[id].value.size(); }
  Tensor<T> grad_or_zero(std::size_t id) const {
    return has_grad(id) ? nodes_[id].grad : Tensor<T>(nodes_[id].value.shape());
  }

  void backward(Var<T> loss) {
    if (loss.graph != this) throw ContractError("backward: loss belongs to another graph");
    if (value(loss.id).size() != 1)
      throw ValidationError("backward: loss must be scalar, got shape " + shape_str(value(loss.id).shape()));
    for (auto& n : nodes_) n.grad = Tensor<T>();
    if (!requires_grad(loss.id)) return;
    grad(loss.id)[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.requires_grad || !has_grad(i)) continue;
      if (check_finite_) assert_finite(n.grad, n.name, "gradient");
      if (n.backward) n.backward();
    }
    for (auto& n : nodes_) {
      if (!n.param || !has_grad(static_cast<std::size_t>(&n - nodes_.data()))) continue;
      auto& pg = n.param->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }

  bool check_finite() const { return check_finite_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
    Parameter<T>* param = nullptr;
    const char* name = "";
  };

  static void assert_finite(const Tensor<T>& t, const char* op, const char* what) {
    for (std::size_t i = 0; i < t.size(); ++i)
      if (!std::isfinite(t[i])) throw ContractError(std::string("non-finite ") + what + " in op '" + op + "'");
  }

  Var<T> push(Tensor<T> value, bool rg, Backward fn, Parameter<T>* p, const char* name) {
    if (check_finite_) assert_finite(value, name, "value");
    nodes_.push_back(Node{std::move(value), Tensor<T>(), rg, std::move(fn), p, name});
    return {this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  std::map<const Parameter<T>*, std::size_t> leaves_;
  bool check_finite_ = false;
};

}  // namespace xlalign::ad
