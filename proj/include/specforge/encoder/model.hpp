#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "specforge/autodiff/params.hpp"
#include "specforge/autodiff/tensor.hpp"
#include "specforge/core/errors.hpp"
#include "specforge/core/rng.hpp"
#include "specforge/encoder/masking.hpp"
#include "specforge/encoder/patches.hpp"

#include <json.hpp>

namespace specforge::encoder {

enum class ReconTarget { kRawPatch, kEmbedding };

struct EncoderConfig {
  int patch = 4;
  int depth = 4;      // L
  int dim = 64;       // d
  int heads = 4;      // H
  int ffn_mult = 4;   // d_ff = ffn_mult * d
  double mask_ratio = 0.7;
  ReconTarget recon_target = ReconTarget::kRawPatch;
  int max_seq = 1024;

  int head_dim() const { return dim / heads; }
  int ffn_dim() const { return ffn_mult * dim; }
};

inline nlohmann::json to_json(const EncoderConfig& c) {
  return {{"patch", c.patch},
          {"depth", c.depth},
          {"dim", c.dim},
          {"heads", c.heads},
          {"ffn_mult", c.ffn_mult},
          {"mask_ratio", c.mask_ratio},
          {"recon_target", c.recon_target == ReconTarget::kRawPatch ? "raw_patch" : "embedding"},
          {"max_seq", c.max_seq}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  if (j.contains("patch")) c.patch = j["patch"].get<int>();
  if (j.contains("depth")) c.depth = j["depth"].get<int>();
  if (j.contains("dim")) c.dim = j["dim"].get<int>();
  if (j.contains("heads")) c.heads = j["heads"].get<int>();
  if (j.contains("ffn_mult")) c.ffn_mult = j["ffn_mult"].get<int>();
  if (j.contains("mask_ratio")) c.mask_ratio = j["mask_ratio"].get<double>();
  if (j.contains("recon_target"))
    c.recon_target = j["recon_target"] == "embedding" ? ReconTarget::kEmbedding
                                                      : ReconTarget::kRawPatch;
  if (j.contains("max_seq")) c.max_seq = j["max_seq"].get<int>();
  if (c.dim % c.heads != 0) throw ConfigError("encoder dim must be divisible by heads");
  return c;
}

// Full transformer state: patch embedding, learnable positions, mask token,
// and per layer the per-head Q/K/V projections, output projection, FFN and
// two layer-norm affine pairs.
template <class Real>
struct EncoderParams {
  EncoderConfig cfg;

  struct Layer {
    std::vector<ad::Param<Real>*> wq, wk, wv;  // per head, d x d_h
    ad::Param<Real>* wo = nullptr;             // d x d
    ad::Param<Real>* w1 = nullptr;             // d x d_ff
    ad::Param<Real>* b1 = nullptr;
    ad::Param<Real>* w2 = nullptr;             // d_ff x d
    ad::Param<Real>* b2 = nullptr;
    ad::Param<Real>* ln1_g = nullptr;
    ad::Param<Real>* ln1_b = nullptr;
    ad::Param<Real>* ln2_g = nullptr;
    ad::Param<Real>* ln2_b = nullptr;
  };

  ad::ParamSet<Real> set;
  ad::Param<Real>* w_emb = nullptr;  // P^2 x d (applied as s_i^T W)
  ad::Param<Real>* b_emb = nullptr;
  ad::Param<Real>* pos = nullptr;        // max_seq x d
  ad::Param<Real>* mask_token = nullptr; // 1 x d
  std::vector<Layer> layers;
};

namespace detail {
template <class Real>
void trunc_normal(ad::Param<Real>& p, Rng& rng, double stddev = 0.02) {
  for (auto& v : p.value) v = static_cast<Real>(rng.truncated_gauss(stddev));
}
template <class Real>
void fill_const(ad::Param<Real>& p, Real c) {
  std::fill(p.value.begin(), p.value.end(), c);
}
}  // namespace detail

template <class Real>
EncoderParams<Real> make_encoder(const EncoderConfig& cfg, std::uint64_t init_seed,
                                 const std::string& prefix = "enc") {
  if (cfg.dim % cfg.heads != 0) throw ConfigError("encoder dim must be divisible by heads");
  EncoderParams<Real> e;
  e.cfg = cfg;
  Rng rng(init_seed);
  const int p2 = cfg.patch * cfg.patch;
  const int dh = cfg.head_dim();

  e.w_emb = &e.set.add(prefix + ".embed.w", {p2, cfg.dim});
  e.b_emb = &e.set.add(prefix + ".embed.b", {cfg.dim});
  e.pos = &e.set.add(prefix + ".pos", {cfg.max_seq, cfg.dim});
  e.mask_token = &e.set.add(prefix + ".mask_token", {1, cfg.dim});
  detail::trunc_normal(*e.w_emb, rng);
  detail::trunc_normal(*e.pos, rng);
  detail::trunc_normal(*e.mask_token, rng);

  for (int l = 0; l < cfg.depth; ++l) {
    typename EncoderParams<Real>::Layer layer;
    const std::string lp = prefix + ".layer" + std::to_string(l);
    for (int h = 0; h < cfg.heads; ++h) {
      layer.wq.push_back(&e.set.add(lp + ".attn.wq" + std::to_string(h), {cfg.dim, dh}));
      layer.wk.push_back(&e.set.add(lp + ".attn.wk" + std::to_string(h), {cfg.dim, dh}));
      layer.wv.push_back(&e.set.add(lp + ".attn.wv" + std::to_string(h), {cfg.dim, dh}));
      detail::trunc_normal(*layer.wq.back(), rng);
      detail::trunc_normal(*layer.wk.back(), rng);
      detail::trunc_normal(*layer.wv.back(), rng);
    }
    layer.wo = &e.set.add(lp + ".attn.wo", {cfg.dim, cfg.dim});
    layer.w1 = &e.set.add(lp + ".ffn.w1", {cfg.dim, cfg.ffn_dim()});
    layer.b1 = &e.set.add(lp + ".ffn.b1", {cfg.ffn_dim()});
    layer.w2 = &e.set.add(lp + ".ffn.w2", {cfg.ffn_dim(), cfg.dim});
    layer.b2 = &e.set.add(lp + ".ffn.b2", {cfg.dim});
    layer.ln1_g = &e.set.add(lp + ".ln1.g", {cfg.dim});
    layer.ln1_b = &e.set.add(lp + ".ln1.b", {cfg.dim});
    layer.ln2_g = &e.set.add(lp + ".ln2.g", {cfg.dim});
    layer.ln2_b = &e.set.add(lp + ".ln2.b", {cfg.dim});
    detail::trunc_normal(*layer.wo, rng);
    detail::trunc_normal(*layer.w1, rng);
    detail::trunc_normal(*layer.w2, rng);
    detail::fill_const(*layer.ln1_g, Real(1));
    detail::fill_const(*layer.ln2_g, Real(1));
    e.layers.push_back(layer);
  }
  return e;
}

// Per-tape binding of the encoder parameters. trainable=false binds values
// as constants, so a frozen encoder records no gradient work.
template <class Real>
struct EncoderBinding {
  const EncoderConfig* cfg = nullptr;
  ad::Var<Real> w_emb, b_emb, pos, mask_token;
  struct LayerB {
    std::vector<ad::Var<Real>> wq, wk, wv;
    ad::Var<Real> wo, w1, b1, w2, b2, ln1_g, ln1_b, ln2_g, ln2_b;
  };
  std::vector<LayerB> layers;
};

template <class Real>
EncoderBinding<Real> bind(ad::Tape<Real>& tape, EncoderParams<Real>& e, bool trainable) {
  auto v = [&](ad::Param<Real>* p) {
    return trainable ? tape.param(*p) : tape.input(p->shape, p->value, false);
  };
  EncoderBinding<Real> b;
  b.cfg = &e.cfg;
  b.w_emb = v(e.w_emb);
  b.b_emb = v(e.b_emb);
  b.pos = v(e.pos);
  b.mask_token = v(e.mask_token);
  for (auto& layer : e.layers) {
    typename EncoderBinding<Real>::LayerB lb;
    for (int h = 0; h < e.cfg.heads; ++h) {
      lb.wq.push_back(v(layer.wq[h]));
      lb.wk.push_back(v(layer.wk[h]));
      lb.wv.push_back(v(layer.wv[h]));
    }
    lb.wo = v(layer.wo);
    lb.w1 = v(layer.w1);
    lb.b1 = v(layer.b1);
    lb.w2 = v(layer.w2);
    lb.b2 = v(layer.b2);
    lb.ln1_g = v(layer.ln1_g);
    lb.ln1_b = v(layer.ln1_b);
    lb.ln2_g = v(layer.ln2_g);
    lb.ln2_b = v(layer.ln2_b);
    b.layers.push_back(std::move(lb));
  }
  return b;
}

// x_i = W_emb s_i + b_emb over all N patches at once.
template <class Real>
ad::Var<Real> embed_tokens(const EncoderBinding<Real>& b, const ad::Var<Real>& patches) {
  return ad::add_rowbias(ad::matmul(patches, b.w_emb), b.b_emb);
}

// z_i = x_i + p_i.
template <class Real>
ad::Var<Real> add_positions(const EncoderBinding<Real>& b, const ad::Var<Real>& tokens) {
  const int n = tokens.shape()[0];
  if (n > b.cfg->max_seq) throw SequenceTooLong("token count exceeds max sequence length");
  return ad::add(tokens, ad::slice_rows(b.pos, 0, n));
}

template <class Real>
ad::Var<Real> apply_mask(const EncoderBinding<Real>& b, const ad::Var<Real>& tokens,
                         const MaskSpec& spec) {
  return ad::mask_rows(tokens, spec.mask_set, b.mask_token);
}

// Post-norm transformer stack:
//   Z~ = LN(Z + MSA(Z)); Z+ = LN(Z~ + FFN(Z~)); FFN uses GELU.
template <class Real>
ad::Var<Real> encoder_forward(const EncoderBinding<Real>& b, ad::Var<Real> z) {
  const Real inv_sqrt_dh = Real(1) / std::sqrt(static_cast<Real>(b.cfg->head_dim()));
  for (const auto& layer : b.layers) {
    std::vector<ad::Var<Real>> heads;
    heads.reserve(layer.wq.size());
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      auto q = ad::matmul(z, layer.wq[h]);
      auto k = ad::matmul(z, layer.wk[h]);
      auto v = ad::matmul(z, layer.wv[h]);
      auto attn = ad::softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_dh));
      heads.push_back(ad::matmul(attn, v));
    }
    auto msa = ad::matmul(ad::concat_cols(heads), layer.wo);
    auto zt = ad::layer_norm_rows(ad::add(z, msa), layer.ln1_g, layer.ln1_b);
    auto ffn = ad::add_rowbias(
        ad::matmul(ad::gelu(ad::add_rowbias(ad::matmul(zt, layer.w1), layer.b1)), layer.w2),
        layer.b2);
    z = ad::layer_norm_rows(ad::add(zt, ffn), layer.ln2_g, layer.ln2_b);
  }
  return z;
}

// Pooled representation h = mean over tokens (1 x d).
template <class Real>
ad::Var<Real> pool_tokens(const ad::Var<Real>& z_final) {
  return ad::mean_rows(z_final);
}

}  // namespace specforge::encoder
