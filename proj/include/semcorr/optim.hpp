#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semcorr/autograd.hpp"

namespace semcorr {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamState {
  AdamConfig config;
  std::vector<BasicTensor<T>> first_moment;
  std::vector<BasicTensor<T>> second_moment;
  long step = 0;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

// Bias-corrected Adam update of `params` in place. All gradients are
// checked before anything is modified, so a rejected step leaves the
// parameters and state untouched.
template <class T>
void adam_step(std::vector<BasicTensor<T>*> params, const std::vector<BasicTensor<T>>& grads,
               AdamState<T>& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks a different parameter list");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].shape() != params[k]->shape() || state.first_moment[k].shape() != params[k]->shape()) {
      throw ShapeError("adam_step: parameter " + std::to_string(k) + " shape " +
                       shape_string(params[k]->shape()) + " vs gradient " +
                       shape_string(grads[k].shape()));
    }
    for (T g : grads[k].data()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(k));
      }
    }
  }
  ++state.step;
  const auto& c = state.config;
  const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& w = *params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / corr1;
      const double v_hat = vi / corr2;
      w[i] = static_cast<T>(w[i] - c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon));
    }
  }
}

// Convenience form over tape parameters: reads each parameter's gradient
// (zero when none flowed), steps, then clears the gradients.
template <class T>
void adam_step(std::vector<BasicVar<T>>& params, AdamState<T>& state) {
  std::vector<BasicTensor<T>*> values;
  std::vector<BasicTensor<T>> grads;
  for (auto& p : params) {
    values.push_back(&p.mutable_value());
    grads.push_back(p.grad().empty() ? BasicTensor<T>(p.shape()) : p.grad());
  }
  adam_step(values, grads, state);
  for (auto& p : params) p.zero_grad();
}

// Plain gradient descent, kept for debugging optimizer issues.
template <class T>
void sgd_step(std::vector<BasicVar<T>>& params, double learning_rate) {
  for (auto& p : params) {
    if (p.grad().empty()) continue;
    auto& w = p.mutable_value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<T>(w[i] - learning_rate * p.grad()[i]);
    }
    p.zero_grad();
  }
}

}  // namespace semcorr
