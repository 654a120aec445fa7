#pragma once

#include "gift/tensor.hpp"

#include <cmath>
#include <vector>

namespace gift {

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed list of parameter tensors; moments are lazily shaped on
// the first step and keyed by position.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamParams params) : params_(params) {}

  void step(std::vector<Tensord*> params, const std::vector<Tensord>& grads) {
    if (params.size() != grads.size())
      throw std::invalid_argument("Adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const Tensord* p : params) {
        m_.push_back(Tensord::zeros(p->shape()));
        v_.push_back(Tensord::zeros(p->shape()));
      }
    }
    ++t_;
    double c1 = 1.0 - std::pow(params_.beta1, t_);
    double c2 = 1.0 - std::pow(params_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto m = m_[i].asVector();
      auto v = v_[i].asVector();
      auto g = grads[i].asVector();
      m = params_.beta1 * m + (1.0 - params_.beta1) * g;
      v = (params_.beta2 * v.array() + (1.0 - params_.beta2) * g.array().square()).matrix();
      params[i]->asVector().array() -=
          params_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + params_.eps);
    }
  }

 private:
  AdamParams params_;
  int t_ = 0;
  std::vector<Tensord> m_, v_;
};

}  // namespace gift
