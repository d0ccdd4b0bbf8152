#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fashion/nn/layers.hpp"

namespace fashion::nn {

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over the trainable entries of a parameter list. Moment estimates are
// exposed as named tensors so that they can be checkpointed.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(ParameterList<T> params, AdamConfig config) : config_(config) {
    for (auto& p : params) {
      if (!p.param->trainable) continue;
      params_.push_back(p);
      Tensor<T> z = p.param->value;
      z.fill(T(0));
      m_.push_back(z);
      v_.push_back(z);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const T lr = static_cast<T>(config_.learning_rate * std::sqrt(bc2) / bc1);
    const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
    const T eps = static_cast<T>(config_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i].param;
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const T g = p.grad[j];
        m_[i][j] = b1 * m_[i][j] + (T(1) - b1) * g;
        v_[i][j] = b2 * v_[i][j] + (T(1) - b2) * g * g;
        p.value[j] -= lr * m_[i][j] / (std::sqrt(v_[i][j]) + eps);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.param->grad.fill(T(0));
  }

  long steps() const noexcept { return t_; }
  void set_steps(long t) noexcept { t_ = t; }

  // Named views of the moment buffers ("<param>.m", "<param>.v").
  ParameterList<T> state() {
    ParameterList<T> out;
    state_views_.resize(2 * params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      state_views_[2 * i].value = m_[i];
      state_views_[2 * i + 1].value = v_[i];
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.push_back({params_[i].name + ".m", &state_views_[2 * i]});
      out.push_back({params_[i].name + ".v", &state_views_[2 * i + 1]});
    }
    return out;
  }

  // Copies state_views_ back after they have been overwritten by a loader.
  void commit_state() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i] = state_views_[2 * i].value;
      v_[i] = state_views_[2 * i + 1].value;
    }
  }

  const ParameterList<T>& parameters() const noexcept { return params_; }

 private:
  AdamConfig config_{};
  ParameterList<T> params_;
  std::vector<Tensor<T>> m_, v_;
  std::vector<Parameter<T>> state_views_;
  long t_ = 0;
};

}  // namespace fashion::nn
