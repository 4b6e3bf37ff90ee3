#pragma once

#include <vector>

#include "specforge/autodiff/tensor.hpp"
#include "specforge/core/errors.hpp"

namespace specforge::train {

struct LossWeights {
  double lambda_recon = 1.0;
  double lambda_cont = 0.3;
  double temperature = 0.2;  // tau
};

// L_recon = (1/|M|) sum_{i in M} ||xhat_i - x_i||^2. xhat rows are the
// masked reconstructions, targets are constants of the same shape.
template <class Real>
ad::Var<Real> loss_recon(const ad::Var<Real>& xhat, const std::vector<Real>& targets) {
  const int m = xhat.shape()[0];
  if (m == 0) throw EmptyMask("loss_recon: empty mask set");
  if (targets.size() != xhat.value().size()) throw ShapeError("loss_recon: target shape mismatch");
  ad::Tape<Real>& tape = *xhat.tape();
  auto diff = ad::sub(xhat, tape.input(xhat.shape(), targets));
  return ad::scale(ad::sum_all(ad::mul(diff, diff)), Real(1) / static_cast<Real>(m));
}

// Supervised contrastive loss over unit-norm projections z [B x d_p]:
//   L = sum_{i, P(i) nonempty} (-1/|P(i)|) sum_{p in P(i)}
//         log exp(z_i.z_p / tau) / sum_{a != i} exp(z_i.z_a / tau).
// Anchors without positives contribute zero.
template <class Real>
ad::Var<Real> loss_supcon(const ad::Var<Real>& z, const std::vector<int>& labels, double tau) {
  const int b = z.shape()[0];
  if (b < 2) throw BatchTooSmall("loss_supcon: need at least 2 samples");
  if (labels.size() != static_cast<std::size_t>(b)) throw ShapeError("loss_supcon: label count");
  ad::Tape<Real>& tape = *z.tape();

  std::vector<Real> pos_w(static_cast<std::size_t>(b) * b, Real(0));
  std::vector<Real> off_diag(static_cast<std::size_t>(b) * b, Real(0));
  std::vector<Real> anchor(static_cast<std::size_t>(b), Real(0));
  for (int i = 0; i < b; ++i) {
    int n_pos = 0;
    for (int p = 0; p < b; ++p) {
      if (p != i) off_diag[i * b + p] = Real(1);
      if (p != i && labels[p] == labels[i]) ++n_pos;
    }
    if (n_pos > 0) {
      anchor[i] = Real(1);
      for (int p = 0; p < b; ++p)
        if (p != i && labels[p] == labels[i]) pos_w[i * b + p] = Real(1) / static_cast<Real>(n_pos);
    }
  }

  auto sim = ad::scale(ad::matmul(z, ad::transpose(z)), Real(1.0 / tau));
  // row-wise log of the masked denominator; |sim| <= 1/tau, no overflow risk
  auto denom = ad::log(ad::sum_cols(ad::mul(ad::exp(sim), tape.input({b, b}, off_diag))));
  auto den_term = ad::sum_all(ad::mul(denom, tape.input({b, 1}, anchor)));
  auto num_term = ad::sum_all(ad::mul(sim, tape.input({b, b}, pos_w)));
  return ad::sub(den_term, num_term);
}

// Mean cross-entropy of logits [B x C] against integer labels.
template <class Real>
ad::Var<Real> cross_entropy(const ad::Var<Real>& logits, const std::vector<int>& labels) {
  const int b = logits.shape()[0], c = logits.shape()[1];
  if (labels.size() != static_cast<std::size_t>(b)) throw ShapeError("cross_entropy: label count");
  std::vector<Real> onehot(static_cast<std::size_t>(b) * c, Real(0));
  for (int i = 0; i < b; ++i) {
    if (labels[i] < 0 || labels[i] >= c) throw IndexError("cross_entropy: label out of range");
    onehot[i * c + labels[i]] = Real(1);
  }
  ad::Tape<Real>& tape = *logits.tape();
  auto picked = ad::mul(ad::log_softmax_rows(logits), tape.input({b, c}, onehot));
  return ad::scale(ad::sum_all(picked), Real(-1) / static_cast<Real>(b));
}

// L = lambda_recon * L_r + lambda_cont * L_c (Eq. 21 shape); the gradient of
// this scalar equals the lambda-weighted sum of the separate gradients.
template <class Real>
ad::Var<Real> combine_losses(const ad::Var<Real>& l_recon, const ad::Var<Real>& l_cont,
                             const LossWeights& w) {
  if (w.lambda_recon < 0.0 || w.lambda_cont < 0.0 || w.temperature <= 0.0)
    throw ConfigError("combine_losses: invalid weights");
  return ad::add(ad::scale(l_recon, static_cast<Real>(w.lambda_recon)),
                 ad::scale(l_cont, static_cast<Real>(w.lambda_cont)));
}

}  // namespace specforge::train
