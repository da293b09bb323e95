#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "chargenet/tensor/tensor.hpp"

namespace chargenet {

enum class InitKind { Uniform, Zero };

/// A trainable tensor. `grad`, when present, always has the shape of `value`.
struct Parameter {
  std::string name;
  Tensor value;
  std::optional<Tensor> grad;
  InitKind init = InitKind::Uniform;

  Tensor& ensure_grad() {
    if (!grad) grad.emplace(value.shape());
    return *grad;
  }
  void zero_grad() {
    if (grad) grad->fill(0.0);
    else grad.emplace(value.shape());
  }
  void clear_grad() { grad.reset(); }
};

/// Owns every parameter of a model under a unique name. Parameters keep a
/// stable address for the store's lifetime; iteration follows insertion order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(const std::string& name, Shape shape, InitKind init = InitKind::Uniform) {
    if (by_name_.count(name)) throw ValidationError("duplicate parameter name '" + name + "'");
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Tensor(std::move(shape));
    p->init = init;
    Parameter& ref = *p;
    by_name_[name] = p.get();
    params_.push_back(std::move(p));
    return ref;
  }

  Parameter* find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }
  const Parameter* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  template <class Fn>
  void for_each(Fn&& fn) {
    for (auto& p : params_) fn(*p);
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (const auto& p : params_) fn(static_cast<const Parameter&>(*p));
  }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  /// Uniform(-scale, scale) for weights, zeros for biases. Draw order is the
  /// insertion order, so a fixed seed gives identical parameters.
  void initialize(std::mt19937_64& rng, double scale = 0.08) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& p : params_) {
      if (p->init == InitKind::Zero) {
        p->value.fill(0.0);
      } else {
        for (double& v : p->value.data()) v = dist(rng);
      }
    }
  }

  std::vector<Tensor> snapshot() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Tensor>& values) {
    if (values.size() != params_.size()) throw ShapeError("snapshot size does not match parameter count");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!values[i].same_shape(params_[i]->value)) {
        throw ShapeError("snapshot shape mismatch for '" + params_[i]->name + "'");
      }
      params_[i]->value = values[i];
    }
  }

  bool all_finite() const {
    for (const auto& p : params_) {
      if (!p->value.all_finite()) return false;
    }
    return true;
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*> by_name_;
};

}  // namespace chargenet
