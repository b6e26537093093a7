// ensdist/params.hpp

// Copyright 2026 The ensdist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENSDIST_PARAMS_HPP_
#define ENSDIST_PARAMS_HPP_

#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "ensdist/rng.hpp"
#include "ensdist/tensor.hpp"

namespace ensdist {
namespace nn {

struct ParamTensor {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
};

// Named parameter tensors in declared order. The declaration order is the
// checkpoint block order, so it must stay stable across construction paths.
class ParameterStore {
 public:
  // Uniform(-a, a) with a = 1/sqrt(fan_in); fan_in = rows for matrices.
  ParamTensor& add(const std::string& name, int rows, int cols, Rng& rng) {
    double a = 1.0 / std::sqrt(static_cast<double>(rows));
    ParamTensor p;
    p.name = name;
    p.value = Tensor(rows, cols);
    for (double& v : p.value.data) v = rng.uniform(-a, a);
    p.grad = Tensor(rows, cols, 0.0);
    p.adam_m = Tensor(rows, cols, 0.0);
    p.adam_v = Tensor(rows, cols, 0.0);
    params_.push_back(std::move(p));
    return params_.back();
  }

  ParamTensor& add_zeros(const std::string& name, int rows, int cols) {
    ParamTensor p;
    p.name = name;
    p.value = Tensor(rows, cols, 0.0);
    p.grad = Tensor(rows, cols, 0.0);
    p.adam_m = Tensor(rows, cols, 0.0);
    p.adam_v = Tensor(rows, cols, 0.0);
    params_.push_back(std::move(p));
    return params_.back();
  }

  void zero_grads() {
    for (ParamTensor& p : params_) {
      std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
    }
  }

  size_t size() const { return params_.size(); }
  ParamTensor& operator[](size_t i) { return params_[i]; }
  const ParamTensor& operator[](size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  int64_t parameter_count() const {
    int64_t n = 0;
    for (const ParamTensor& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::deque<ParamTensor> params_;  // stable addresses across add()
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 5.0;  // global-norm clip; <= 0 disables
};

// Adam with optional global-norm gradient clipping.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParameterStore& params) {
    ++t_;
    if (cfg_.grad_clip > 0.0) {
      double norm_sq = 0.0;
      for (ParamTensor& p : params) {
        for (double g : p.grad.data) norm_sq += g * g;
      }
      double norm = std::sqrt(norm_sq);
      if (norm > cfg_.grad_clip) {
        double s = cfg_.grad_clip / norm;
        for (ParamTensor& p : params) {
          for (double& g : p.grad.data) g *= s;
        }
      }
    }
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (ParamTensor& p : params) {
      for (int64_t i = 0; i < p.value.size(); ++i) {
        double g = p.grad.data[i];
        p.adam_m.data[i] = cfg_.beta1 * p.adam_m.data[i] + (1.0 - cfg_.beta1) * g;
        p.adam_v.data[i] =
            cfg_.beta2 * p.adam_v.data[i] + (1.0 - cfg_.beta2) * g * g;
        double mhat = p.adam_m.data[i] / bc1;
        double vhat = p.adam_v.data[i] / bc2;
        p.value.data[i] -=
            cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

  int64_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
};

}  // namespace nn
}  // namespace ensdist

#endif  // ENSDIST_PARAMS_HPP_
