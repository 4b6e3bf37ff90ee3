#pragma once

#include <cmath>
#include <vector>

#include "specforge/autodiff/tensor.hpp"
#include "specforge/core/errors.hpp"

namespace specforge::train {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
  double lr_scale = 1.0;     // per-group multiplier (reduced-lr fine-tuning)
  double clip_norm = 0.0;    // 0 = off
};

// Decoupled-weight-decay Adam over one parameter group:
//   p <- p - lr * (mhat / (sqrt(vhat) + eps) + wd * p).
template <class Real>
class AdamW {
 public:
  AdamW(std::vector<ad::Param<Real>*> params, AdamWConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (auto* p : params_) {
      moments1_.emplace_back(p->value.size(), Real(0));
      moments2_.emplace_back(p->value.size(), Real(0));
    }
  }

  void step(double lr) {
    ++step_count_;
    const double eff_lr = lr * cfg_.lr_scale;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, step_count_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, step_count_);
    if (cfg_.clip_norm > 0.0) clip_gradients();
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      ad::Param<Real>& p = *params_[pi];
      auto& m = moments1_[pi];
      auto& v = moments2_[pi];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = static_cast<Real>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g);
        v[i] = static_cast<Real>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g);
        const double mhat = static_cast<double>(m[i]) / bc1;
        const double vhat = static_cast<double>(v[i]) / bc2;
        const double update =
            mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * static_cast<double>(p.value[i]);
        p.value[i] = static_cast<Real>(static_cast<double>(p.value[i]) - eff_lr * update);
      }
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  long step_count() const { return step_count_; }

 private:
  void clip_gradients() {
    double sq = 0.0;
    for (auto* p : params_)
      for (Real g : p->grad) sq += static_cast<double>(g) * static_cast<double>(g);
    const double norm = std::sqrt(sq);
    if (norm <= cfg_.clip_norm) return;
    const Real s = static_cast<Real>(cfg_.clip_norm / norm);
    for (auto* p : params_)
      for (Real& g : p->grad) g *= s;
  }

  std::vector<ad::Param<Real>*> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<Real>> moments1_, moments2_;
  long step_count_ = 0;
};

}  // namespace specforge::train
