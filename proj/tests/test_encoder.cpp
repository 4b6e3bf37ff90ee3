#include <gtest/gtest.h>

#include <cmath>

#include "specforge/autodiff/gradcheck.hpp"
#include "specforge/encoder/heads.hpp"
#include "specforge/encoder/masking.hpp"
#include "specforge/encoder/model.hpp"
#include "specforge/encoder/patches.hpp"
#include "specforge/train/losses.hpp"
#include "specforge/train/loops.hpp"

using namespace specforge;
using namespace specforge::encoder;

namespace {

specgen::Spectrogram random_spec(std::size_t t, std::size_t k, std::uint64_t seed) {
  specgen::Spectrogram s;
  s.t = t;
  s.k = k;
  s.c = 1;
  s.normalized = true;
  s.data.resize(t * k);
  Rng rng(seed);
  for (auto& v : s.data) v = static_cast<float>(rng.gauss());
  return s;
}

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.patch = 4;
  cfg.depth = 2;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.ffn_mult = 2;
  cfg.mask_ratio = 0.5;
  cfg.max_seq = 16;
  return cfg;
}

}  // namespace

TEST(Patchify, CountMatchesGeometry) {
  const auto s128 = random_spec(128, 128, 1);
  PatchGrid grid;
  patchify<double>(s128, 4, &grid);
  EXPECT_EQ(grid.n(), 1024u);  // max sequence length of the full-size config
  const auto s8 = random_spec(8, 8, 2);
  patchify<double>(s8, 4, &grid);
  EXPECT_EQ(grid.n(), 4u);
}

TEST(Patchify, RoundtripBitwise) {
  const auto s = random_spec(16, 12, 3);
  PatchGrid grid;
  const auto p = patchify<float>(s, 4, &grid);
  const auto back = unpatchify<float>(p, grid);
  EXPECT_EQ(back, s.data);
}

TEST(Patchify, RejectsNonDivisible) {
  const auto s = random_spec(10, 8, 4);
  EXPECT_THROW(patchify<double>(s, 4), ShapeError);
}

TEST(Patchify, TimeMajorOrdering) {
  specgen::Spectrogram s;
  s.t = 4;
  s.k = 4;
  s.data.assign(16, 0.0f);
  s.data[0 * 4 + 2] = 7.0f;  // row 0, col 2 -> patch (0,1), local (0,0)
  const auto p = patchify<double>(s, 2);
  EXPECT_DOUBLE_EQ(p[1 * 4 + 0], 7.0);
}

TEST(EmbedTokens, ZeroPatchZeroBiasGivesZeroToken) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 5);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  auto patches = tape.input({1, 16}, std::vector<double>(16, 0.0));
  auto x = embed_tokens(eb, patches);
  for (double v : x.value()) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(EmbedTokens, LinearInPatch) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 6);
  std::fill(enc.b_emb->value.begin(), enc.b_emb->value.end(), 0.0);  // purely linear map
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  Rng rng(7);
  std::vector<double> a(16), b(16), sum(16);
  for (std::size_t i = 0; i < 16; ++i) {
    a[i] = rng.gauss();
    b[i] = rng.gauss();
    sum[i] = a[i] + b[i];
  }
  auto xa = embed_tokens(eb, tape.input({1, 16}, a));
  auto xb = embed_tokens(eb, tape.input({1, 16}, b));
  auto xs = embed_tokens(eb, tape.input({1, 16}, sum));
  for (int j = 0; j < 8; ++j)
    EXPECT_NEAR(xs.value()[j], xa.value()[j] + xb.value()[j], 1e-12);
}

TEST(EmbedTokens, ShapeContract) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 8);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  const auto s = random_spec(8, 8, 9);
  auto x = embed_tokens(eb, tape.input({4, 16}, patchify<double>(s, 4)));
  EXPECT_EQ(x.shape(), (ad::Shape{4, 8}));
}

TEST(AddPositions, ZeroPositionsIdentity) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 10);
  std::fill(enc.pos->value.begin(), enc.pos->value.end(), 0.0);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  Rng rng(11);
  std::vector<double> vals(4 * 8);
  for (auto& v : vals) v = rng.gauss();
  auto x = tape.input({4, 8}, vals);
  auto z = add_positions(eb, x);
  EXPECT_EQ(z.value(), vals);
}

TEST(AddPositions, DistinctPositionsSeparateEqualTokens) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 12);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  auto x = tape.input({2, 8}, std::vector<double>(16, 1.0));
  auto z = add_positions(eb, x);
  bool differ = false;
  for (int j = 0; j < 8; ++j)
    if (z.value()[j] != z.value()[8 + j]) differ = true;
  EXPECT_TRUE(differ);
}

TEST(AddPositions, SequenceTooLongThrows) {
  auto cfg = tiny_config();
  cfg.max_seq = 2;
  auto enc = make_encoder<double>(cfg, 13);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  auto x = tape.input({4, 8}, std::vector<double>(32, 0.0));
  EXPECT_THROW(add_positions(eb, x), SequenceTooLong);
}

TEST(SampleMask, CardinalityIsFloorRhoN) {
  EXPECT_EQ(sample_mask(1024, 0.7, 1).mask_set.size(), 716u);
  EXPECT_EQ(sample_mask(10, 0.0, 1).mask_set.size(), 0u);
  for (std::size_t n : {7u, 64u, 100u, 333u})
    for (double rho : {0.1, 0.5, 0.7, 0.9})
      EXPECT_EQ(sample_mask(n, rho, 9).mask_set.size(),
                static_cast<std::size_t>(rho * static_cast<double>(n)));
}

TEST(SampleMask, DeterministicAndDistinct) {
  const auto a = sample_mask(64, 0.7, 42);
  const auto b = sample_mask(64, 0.7, 42);
  EXPECT_EQ(a.mask_set, b.mask_set);
  for (std::size_t i = 1; i < a.mask_set.size(); ++i) {
    EXPECT_LT(a.mask_set[i - 1], a.mask_set[i]);  // sorted, so also distinct
    EXPECT_LT(a.mask_set[i], 64u);
  }
}

TEST(ApplyMask, EmptyMaskIsIdentity) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 14);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  Rng rng(15);
  std::vector<double> vals(4 * 8);
  for (auto& v : vals) v = rng.gauss();
  auto x = tape.input({4, 8}, vals);
  MaskSpec spec;  // empty
  auto xm = apply_mask(eb, x, spec);
  EXPECT_EQ(xm.value(), vals);
}

TEST(ApplyMask, MaskedRowsShareToken) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 16);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  Rng rng(17);
  std::vector<double> vals(4 * 8);
  for (auto& v : vals) v = rng.gauss();
  auto x = tape.input({4, 8}, vals);
  MaskSpec spec;
  spec.mask_set = {0, 1, 2, 3};
  auto xm = apply_mask(eb, x, spec);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 8; ++j)
      EXPECT_EQ(xm.value()[i * 8 + j], enc.mask_token->value[j]);
}

TEST(ApplyMask, UnmaskedRowsBitwiseUnchanged) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 18);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  Rng rng(19);
  std::vector<double> vals(6 * 8);
  for (auto& v : vals) v = rng.gauss();
  auto x = tape.input({6, 8}, vals);
  MaskSpec spec;
  spec.mask_set = {1, 4};
  auto xm = apply_mask(eb, x, spec);
  for (int i : {0, 2, 3, 5})
    for (int j = 0; j < 8; ++j) EXPECT_EQ(xm.value()[i * 8 + j], vals[i * 8 + j]);
}

TEST(ApplyMask, OutOfRangeThrows) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 20);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  auto x = tape.input({2, 8}, std::vector<double>(16, 0.0));
  MaskSpec spec;
  spec.mask_set = {5};
  EXPECT_THROW(apply_mask(eb, x, spec), IndexError);
}

// with positions zeroed the stack is permutation-equivariant
TEST(EncoderForward, PermutationEquivariance) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 21);
  std::fill(enc.pos->value.begin(), enc.pos->value.end(), 0.0);
  Rng rng(22);
  const int n = 8, d = 8;
  std::vector<double> vals(n * d);
  for (auto& v : vals) v = rng.gauss();
  std::vector<std::size_t> perm = {3, 1, 7, 0, 5, 2, 6, 4};
  std::vector<double> pvals(n * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) pvals[i * d + j] = vals[perm[i] * d + j];

  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  auto out = encoder_forward(eb, add_positions(eb, tape.input({n, d}, vals)));
  auto pout = encoder_forward(eb, add_positions(eb, tape.input({n, d}, pvals)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      EXPECT_NEAR(pout.value()[i * d + j], out.value()[perm[i] * d + j], 1e-9);
}

TEST(EncoderForward, SingleTokenSequence) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 23);
  ad::Tape<double> tape;
  auto eb = bind(tape, enc, false);
  auto out = encoder_forward(eb, tape.input({1, 8}, std::vector<double>(8, 0.3)));
  EXPECT_EQ(out.shape(), (ad::Shape{1, 8}));
  for (double v : out.value()) EXPECT_TRUE(std::isfinite(v));
}

TEST(DecodeMasked, OutputCountMatchesMaskSize) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 24);
  auto dec = make_decoder<double>(cfg.dim, cfg.ffn_dim(), cfg.patch * cfg.patch, 25);
  ad::Tape<double> tape;
  auto db = bind(tape, dec, false);
  Rng rng(26);
  std::vector<double> z(4 * 8);
  for (auto& v : z) v = rng.gauss();
  MaskSpec spec;
  spec.mask_set = {0, 2};
  auto xhat = decode_masked(db, tape.input({4, 8}, z), spec);
  EXPECT_EQ(xhat.shape(), (ad::Shape{2, 16}));
}

// near-identity construction: w1 = [I], large bias through the GELU's linear
// region, w2 undoes it
TEST(DecodeMasked, IdentityConstructionReproducesInput) {
  const int d = 8;
  auto dec = make_decoder<double>(d, d, d, 27);
  std::fill(dec.w1->value.begin(), dec.w1->value.end(), 0.0);
  std::fill(dec.w2->value.begin(), dec.w2->value.end(), 0.0);
  for (int i = 0; i < d; ++i) {
    dec.w1->value[i * d + i] = 1.0;
    dec.w2->value[i * d + i] = 1.0;
  }
  std::fill(dec.b1->value.begin(), dec.b1->value.end(), 20.0);
  std::fill(dec.b2->value.begin(), dec.b2->value.end(), -20.0);
  ad::Tape<double> tape;
  auto db = bind(tape, dec, false);
  Rng rng(28);
  std::vector<double> z(2 * d);
  for (auto& v : z) v = rng.gauss();
  MaskSpec spec;
  spec.mask_set = {0, 1};
  auto xhat = decode_masked(db, tape.input({2, d}, z), spec);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(xhat.value()[i], z[i], 1e-9);
}

TEST(DecodeMasked, GradientFlowsToEncoderThroughMaskedPositions) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 29);
  auto dec = make_decoder<double>(cfg.dim, cfg.ffn_dim(), cfg.patch * cfg.patch, 30);
  const auto s = random_spec(8, 8, 31);
  const auto mask = sample_mask(4, 0.5, 32);
  ad::Tape<double> tape;
  auto g = train::build_recon_graph(tape, enc, dec, /*trainable=*/true, s, mask);
  tape.backward(g.loss);
  tape.collect_param_grads();
  double norm = 0.0;
  for (double v : enc.w_emb->grad) norm += v * v;
  EXPECT_GT(norm, 0.0);
  double mt = 0.0;
  for (double v : enc.mask_token->grad) mt += v * v;
  EXPECT_GT(mt, 0.0);
}

TEST(ProjectContrastive, UnitNormAlways) {
  auto proj = make_projector<double>(8, 4, 33);
  ad::Tape<double> tape;
  auto pb = bind(tape, proj, false);
  Rng rng(34);
  std::vector<double> h(3 * 8);
  for (auto& v : h) v = 2.0 * rng.gauss();
  auto z = project_contrastive(pb, tape.input({3, 8}, h));
  for (int i = 0; i < 3; ++i) {
    double n = 0.0;
    for (int j = 0; j < 4; ++j) n += z.value()[i * 4 + j] * z.value()[i * 4 + j];
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
  }
}

TEST(ProjectContrastive, ScaleInvariantWithZeroBias) {
  auto proj = make_projector<double>(8, 4, 35);
  std::fill(proj.b->value.begin(), proj.b->value.end(), 0.0);
  ad::Tape<double> tape;
  auto pb = bind(tape, proj, false);
  Rng rng(36);
  std::vector<double> h(8), h2(8);
  for (std::size_t i = 0; i < 8; ++i) {
    h[i] = rng.gauss();
    h2[i] = 2.0 * h[i];
  }
  auto za = project_contrastive(pb, tape.input({1, 8}, h));
  auto zb = project_contrastive(pb, tape.input({1, 8}, h2));
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(za.value()[j], zb.value()[j], 1e-12);
}

TEST(ProjectContrastive, HandNormalizedTwoVector) {
  // identity projection of [3,4] -> [0.6, 0.8]
  auto proj = make_projector<double>(2, 2, 37);
  std::fill(proj.w->value.begin(), proj.w->value.end(), 0.0);
  proj.w->value[0] = 1.0;
  proj.w->value[3] = 1.0;
  std::fill(proj.b->value.begin(), proj.b->value.end(), 0.0);
  ad::Tape<double> tape;
  auto pb = bind(tape, proj, false);
  auto z = project_contrastive(pb, tape.input({1, 2}, {3.0, 4.0}));
  EXPECT_NEAR(z.value()[0], 0.6, 1e-12);
  EXPECT_NEAR(z.value()[1], 0.8, 1e-12);
}

TEST(ProjectContrastive, ZeroVectorThrows) {
  auto proj = make_projector<double>(4, 2, 38);
  std::fill(proj.w->value.begin(), proj.w->value.end(), 0.0);
  std::fill(proj.b->value.begin(), proj.b->value.end(), 0.0);
  ad::Tape<double> tape;
  auto pb = bind(tape, proj, false);
  EXPECT_THROW(project_contrastive(pb, tape.input({1, 4}, std::vector<double>(4, 1.0))),
               DegenerateProjection);
}

TEST(Classify, LogitCountMatchesClasses) {
  auto cls = make_classifier<double>(5, 39);
  ad::Tape<double> tape;
  auto cb = bind(tape, cls, false);
  Rng rng(40);
  std::vector<double> pooled(16);
  for (auto& v : pooled) v = rng.gauss();
  auto logits = classify(cb, tape.input({1, 16}, pooled));
  EXPECT_EQ(logits.shape(), (ad::Shape{1, 5}));
}

// zeroed convs: residual path passes z_bar through, so every logit is
// mean(z_bar) * sum_c W_cls[c, k] + b_k
TEST(Classify, ZeroedConvsDegenerateToPooledMean) {
  auto cls = make_classifier<double>(3, 41);
  for (auto& blk : cls.blocks) {
    std::fill(blk.w1->value.begin(), blk.w1->value.end(), 0.0);
    std::fill(blk.b1->value.begin(), blk.b1->value.end(), 0.0);
    std::fill(blk.w2->value.begin(), blk.w2->value.end(), 0.0);
    std::fill(blk.b2->value.begin(), blk.b2->value.end(), 0.0);
  }
  Rng rng(42);
  const int d = 12;
  std::vector<double> pooled(d);
  double mean = 0.0;
  for (auto& v : pooled) {
    v = rng.gauss();
    mean += v;
  }
  mean /= d;
  ad::Tape<double> tape;
  auto cb = bind(tape, cls, false);
  auto logits = classify(cb, tape.input({1, d}, pooled));
  for (int k = 0; k < 3; ++k) {
    double wsum = 0.0;
    for (int c = 0; c < 16; ++c) wsum += cls.w_cls->value[c * 3 + k];
    EXPECT_NEAR(logits.value()[k], mean * wsum + cls.b_cls->value[k], 1e-9);
  }
}

TEST(PoolTokens, ConstantRowsPoolToThatRow) {
  ad::Tape<double> tape;
  std::vector<double> vals(3 * 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) vals[i * 4 + j] = 0.5 * j;
  auto pooled = pool_tokens(tape.input({3, 4}, vals));
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(pooled.value()[j], 0.5 * j, 1e-12);
}

// end-to-end gradient check of the full pretraining graph at toy shape
// (N=4 tokens, d=8, L=2), float64 central differences
TEST(EncoderForward, EndToEndGradCheck) {
  auto cfg = tiny_config();
  auto enc = make_encoder<double>(cfg, 43);
  auto dec = make_decoder<double>(cfg.dim, cfg.ffn_dim(), cfg.patch * cfg.patch, 44);
  const auto s = random_spec(8, 8, 45);
  const auto mask = sample_mask(4, 0.5, 46);

  std::vector<ad::Param<double>*> inputs = enc.set.all();
  for (auto* p : dec.set.all()) inputs.push_back(p);

  const auto report = ad::grad_check<double>(
      [&](ad::Tape<double>& tape, std::vector<ad::Param<double>*>&) {
        return train::build_recon_graph(tape, enc, dec, true, s, mask).loss;
      },
      inputs, 1e-5, 1e-4);
  EXPECT_TRUE(report.pass()) << report.worst << " rel " << report.max_rel_err;
  EXPECT_GT(report.checked, 1000u);
}
