/*
 * Copyright 2026 The graphleak Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "graphleak/tensor.hpp"

namespace graphleak {

/// Raised when a gradient contains NaN or infinity.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates for one variable.
struct AdamMoments {
  Tensor m;
  Tensor v;

  static AdamMoments like(const Tensor& t) {
    return {Tensor(t.rows(), t.cols()), Tensor(t.rows(), t.cols())};
  }
};

/// One bias-corrected Adam update of `var` in place; t counts from 1.
inline void adam_update(Tensor& var, AdamMoments& moments, const Tensor& grad, double lr,
                        long long t, const AdamHyper& h = {}) {
  if (t < 1) throw Error("adam: step counter must start at 1");
  if (!grad.same_shape(var) || !moments.m.same_shape(var)) {
    throw ShapeError("adam: gradient " + grad.shape_string() + " does not match variable " +
                     var.shape_string());
  }
  if (!grad.all_finite()) throw DivergenceError("adam: non-finite gradient");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < var.size(); ++i) {
    const double g = grad[i];
    moments.m[i] = h.beta1 * moments.m[i] + (1.0 - h.beta1) * g;
    moments.v[i] = h.beta2 * moments.v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = moments.m[i] / c1;
    const double v_hat = moments.v[i] / c2;
    var[i] -= lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

/// Adam over a fixed list of variables.
class Adam {
 public:
  explicit Adam(std::span<const Tensor* const> shapes, double lr, AdamHyper hyper = {})
      : lr_(lr), hyper_(hyper) {
    for (const Tensor* t : shapes) moments_.push_back(AdamMoments::like(*t));
  }

  /// Validates every gradient before touching any variable, so a divergent
  /// step leaves the state as it was.
  void step(std::span<Tensor* const> vars, std::span<const Tensor> grads) {
    if (vars.size() != moments_.size() || grads.size() != moments_.size()) {
      throw Error("adam: variable count changed");
    }
    for (const Tensor& g : grads) {
      if (!g.all_finite()) throw DivergenceError("adam: non-finite gradient");
    }
    ++t_;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      adam_update(*vars[i], moments_[i], grads[i], lr_, t_, hyper_);
    }
  }

  long long steps() const noexcept { return t_; }
  const std::vector<AdamMoments>& moments() const noexcept { return moments_; }

 private:
  double lr_;
  AdamHyper hyper_;
  std::vector<AdamMoments> moments_;
  long long t_ = 0;
};

}  // namespace graphleak
