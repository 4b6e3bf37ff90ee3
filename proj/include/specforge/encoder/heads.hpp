#pragma once

#include <string>
#include <vector>

#include "specforge/autodiff/params.hpp"
#include "specforge/autodiff/tensor.hpp"
#include "specforge/encoder/masking.hpp"
#include "specforge/encoder/model.hpp"

namespace specforge::encoder {

// Reconstruction decoder g_phi: 2-layer MLP d -> d_ff -> out_dim, GELU.
// out_dim is P^2 for raw-patch targets, d for embedding targets.
template <class Real>
struct DecoderParams {
  ad::ParamSet<Real> set;
  ad::Param<Real>* w1 = nullptr;
  ad::Param<Real>* b1 = nullptr;
  ad::Param<Real>* w2 = nullptr;
  ad::Param<Real>* b2 = nullptr;
  int dim = 0, hidden = 0, out_dim = 0;
};

template <class Real>
DecoderParams<Real> make_decoder(int dim, int hidden, int out_dim, std::uint64_t seed,
                                 const std::string& prefix = "dec") {
  DecoderParams<Real> d;
  d.dim = dim;
  d.hidden = hidden;
  d.out_dim = out_dim;
  Rng rng(seed);
  d.w1 = &d.set.add(prefix + ".w1", {dim, hidden});
  d.b1 = &d.set.add(prefix + ".b1", {hidden});
  d.w2 = &d.set.add(prefix + ".w2", {hidden, out_dim});
  d.b2 = &d.set.add(prefix + ".b2", {out_dim});
  detail::trunc_normal(*d.w1, rng);
  detail::trunc_normal(*d.w2, rng);
  return d;
}

template <class Real>
struct DecoderBinding {
  ad::Var<Real> w1, b1, w2, b2;
};

template <class Real>
DecoderBinding<Real> bind(ad::Tape<Real>& tape, DecoderParams<Real>& d, bool trainable) {
  auto v = [&](ad::Param<Real>* p) {
    return trainable ? tape.param(*p) : tape.input(p->shape, p->value, false);
  };
  return {v(d.w1), v(d.b1), v(d.w2), v(d.b2)};
}

// x_hat_i = g_phi(z_i) for the masked indices only; |M| x out_dim.
template <class Real>
ad::Var<Real> decode_masked(const DecoderBinding<Real>& d, const ad::Var<Real>& z_final,
                            const MaskSpec& spec) {
  auto masked = ad::gather_rows(z_final, spec.mask_set);
  auto h = ad::gelu(ad::add_rowbias(ad::matmul(masked, d.w1), d.b1));
  return ad::add_rowbias(ad::matmul(h, d.w2), d.b2);
}

// Contrastive projector: z = (h W_p + b_p) / ||.||_2.
template <class Real>
struct ProjectorParams {
  ad::ParamSet<Real> set;
  ad::Param<Real>* w = nullptr;  // d x d_p
  ad::Param<Real>* b = nullptr;
};

template <class Real>
ProjectorParams<Real> make_projector(int dim, int proj_dim, std::uint64_t seed,
                                     const std::string& prefix = "proj") {
  ProjectorParams<Real> p;
  Rng rng(seed);
  p.w = &p.set.add(prefix + ".w", {dim, proj_dim});
  p.b = &p.set.add(prefix + ".b", {proj_dim});
  detail::trunc_normal(*p.w, rng);
  return p;
}

template <class Real>
struct ProjectorBinding {
  ad::Var<Real> w, b;
};

template <class Real>
ProjectorBinding<Real> bind(ad::Tape<Real>& tape, ProjectorParams<Real>& p, bool trainable) {
  auto v = [&](ad::Param<Real>* q) {
    return trainable ? tape.param(*q) : tape.input(q->shape, q->value, false);
  };
  return {v(p.w), v(p.b)};
}

template <class Real>
ad::Var<Real> project_contrastive(const ProjectorBinding<Real>& p, const ad::Var<Real>& h) {
  return ad::l2_normalize_rows(ad::add_rowbias(ad::matmul(h, p.w), p.b));
}

// Classifier: the pooled token mean is treated as a 1-channel sequence of
// length d and run through residual conv1d blocks (kernel 3, same padding),
// then GAP over positions and a linear readout. The first block's skip
// replicates the single input channel across the 16 block channels, so a
// zero-initialized conv stack passes the pooled vector straight through.
template <class Real>
struct ClassifierParams {
  static constexpr int kChannels = 16;
  static constexpr int kBlocks = 2;
  ad::ParamSet<Real> set;
  struct Block {
    ad::Param<Real>*w1, *b1, *w2, *b2;
  };
  std::vector<Block> blocks;
  ad::Param<Real>* w_cls = nullptr;  // kChannels x n_classes
  ad::Param<Real>* b_cls = nullptr;
  int n_classes = 0;
};

template <class Real>
ClassifierParams<Real> make_classifier(int n_classes, std::uint64_t seed,
                                       const std::string& prefix = "cls") {
  ClassifierParams<Real> c;
  c.n_classes = n_classes;
  Rng rng(seed);
  const int ch = ClassifierParams<Real>::kChannels;
  for (int bi = 0; bi < ClassifierParams<Real>::kBlocks; ++bi) {
    const int c_in = bi == 0 ? 1 : ch;
    const std::string bp = prefix + ".block" + std::to_string(bi);
    typename ClassifierParams<Real>::Block blk;
    blk.w1 = &c.set.add(bp + ".conv1.w", {ch, c_in, 3});
    blk.b1 = &c.set.add(bp + ".conv1.b", {ch});
    blk.w2 = &c.set.add(bp + ".conv2.w", {ch, ch, 3});
    blk.b2 = &c.set.add(bp + ".conv2.b", {ch});
    detail::trunc_normal(*blk.w1, rng);
    detail::trunc_normal(*blk.w2, rng);
    c.blocks.push_back(blk);
  }
  c.w_cls = &c.set.add(prefix + ".w", {ch, n_classes});
  c.b_cls = &c.set.add(prefix + ".b", {n_classes});
  detail::trunc_normal(*c.w_cls, rng);
  return c;
}

template <class Real>
struct ClassifierBinding {
  struct Block {
    ad::Var<Real> w1, b1, w2, b2;
  };
  std::vector<Block> blocks;
  ad::Var<Real> w_cls, b_cls;
};

template <class Real>
ClassifierBinding<Real> bind(ad::Tape<Real>& tape, ClassifierParams<Real>& c, bool trainable) {
  auto v = [&](ad::Param<Real>* p) {
    return trainable ? tape.param(*p) : tape.input(p->shape, p->value, false);
  };
  ClassifierBinding<Real> b;
  for (auto& blk : c.blocks) b.blocks.push_back({v(blk.w1), v(blk.b1), v(blk.w2), v(blk.b2)});
  b.w_cls = v(c.w_cls);
  b.b_cls = v(c.b_cls);
  return b;
}

// pooled: [1 x d] -> logits [1 x n_classes].
template <class Real>
ad::Var<Real> classify(const ClassifierBinding<Real>& c, const ad::Var<Real>& pooled) {
  const int len = pooled.shape()[1];
  ad::Var<Real> x = pooled;  // [C=1, L=d]
  for (std::size_t bi = 0; bi < c.blocks.size(); ++bi) {
    const auto& blk = c.blocks[bi];
    auto h = ad::conv1d(ad::relu(ad::conv1d(x, blk.w1, blk.b1)), blk.w2, blk.b2);
    auto skip = bi == 0 ? ad::repeat_rows(x, ClassifierParams<Real>::kChannels) : x;
    x = ad::add(skip, h);
  }
  auto gap = ad::scale(ad::sum_cols(x), Real(1) / static_cast<Real>(len));  // [ch x 1]
  return ad::add_rowbias(ad::matmul(ad::transpose(gap), c.w_cls), c.b_cls);
}

}  // namespace specforge::encoder
