#pragma once

#include <string>
#include <vector>

#include "chargenet/tensor/parameter.hpp"

namespace chargenet {

struct SgdConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  }
};

/// p <- p - lr * g for every parameter, then clears the gradients.
/// Every parameter must carry a gradient buffer.
inline void sgd_step(const std::vector<Parameter*>& params, const SgdConfig& config) {
  config.validate();
  for (const Parameter* p : params) {
    if (!p->grad) throw StateError("sgd_step: parameter '" + p->name + "' has no gradient");
  }
  for (Parameter* p : params) {
    auto value = p->value.data();
    auto grad = p->grad->data();
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= config.learning_rate * grad[i];
    p->clear_grad();
  }
}

inline void sgd_step(ParameterStore& store, const SgdConfig& config) { sgd_step(store.all(), config); }

}  // namespace chargenet
