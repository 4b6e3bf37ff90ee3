#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "specforge/autodiff/params.hpp"
#include "specforge/autodiff/tensor.hpp"
#include "specforge/core/errors.hpp"
#include "specforge/encoder/model.hpp"
#include "specforge/specgen/spectrogram.hpp"
#include "specforge/train/loops.hpp"
#include "specforge/train/losses.hpp"
#include "specforge/train/optimizer.hpp"

#include <json.hpp>

namespace specforge::moe {

inline constexpr int kNumExperts = 3;
// Fixed expert order: index 0 = WIFI_LIKE, 1 = LTE_LIKE, 2 = NR_LIKE.
inline constexpr const char* kExpertOrder[kNumExperts] = {"WIFI_LIKE", "LTE_LIKE", "NR_LIKE"};

enum class AggregationMode { kDense, kTop1 };

// Lightweight gating network: a 2-layer transformer (d_r = 64) over the same
// patch tokenization as the experts, GAP over tokens, then a linear map to
// one logit per expert.
template <class Real>
struct RouterParams {
  encoder::EncoderParams<Real> backbone;
  ad::Param<Real>* w_r = nullptr;  // d_r x 3
  ad::Param<Real>* b_r = nullptr;
};

template <class Real>
RouterParams<Real> make_router(int patch, std::uint64_t seed, int max_seq = 1024) {
  encoder::EncoderConfig cfg;
  cfg.patch = patch;
  cfg.depth = 2;
  cfg.dim = 64;
  cfg.heads = 4;
  cfg.ffn_mult = 4;
  cfg.max_seq = max_seq;
  RouterParams<Real> r;
  r.backbone = encoder::make_encoder<Real>(cfg, seed, "router");
  r.w_r = &r.backbone.set.add("router.head.w", {cfg.dim, kNumExperts});
  r.b_r = &r.backbone.set.add("router.head.b", {kNumExperts});
  Rng rng(mix_seed(seed, 0x77));
  encoder::detail::trunc_normal(*r.w_r, rng);
  return r;
}

struct RouteDecision {
  std::vector<double> weights;  // g, length 3, on the simplex
  int chosen = 0;               // k* = lowest index among the argmax set
  AggregationMode mode = AggregationMode::kTop1;
};

// Router forward as a graph; used for both inference and training.
template <class Real>
ad::Var<Real> route_logits(ad::Tape<Real>& tape, RouterParams<Real>& router,
                           const specgen::Spectrogram& s, bool trainable) {
  const auto patch_vals = encoder::patchify<Real>(s, router.backbone.cfg.patch);
  const int p2 = router.backbone.cfg.patch * router.backbone.cfg.patch;
  const int n = static_cast<int>(patch_vals.size()) / p2;
  auto eb = encoder::bind(tape, router.backbone, trainable);
  auto x = encoder::embed_tokens(eb, tape.input({n, p2}, patch_vals));
  auto zl = encoder::encoder_forward(eb, encoder::add_positions(eb, x));
  auto gap = ad::mean_rows(zl);
  auto w = trainable ? tape.param(*router.w_r) : tape.input(router.w_r->shape, router.w_r->value);
  auto b = trainable ? tape.param(*router.b_r) : tape.input(router.b_r->shape, router.b_r->value);
  return ad::add_rowbias(ad::matmul(gap, w), b);
}

template <class Real>
RouteDecision route(const specgen::Spectrogram& s, RouterParams<Real>& router,
                    AggregationMode mode = AggregationMode::kTop1) {
  ad::Tape<Real> tape;
  auto logits = route_logits(tape, router, s, /*trainable=*/false);
  auto g = ad::softmax_rows(logits);
  RouteDecision d;
  d.mode = mode;
  d.weights.assign(g.value().begin(), g.value().end());
  d.chosen = 0;
  for (int k = 1; k < kNumExperts; ++k)
    if (d.weights[k] > d.weights[d.chosen]) d.chosen = k;  // ties keep the lowest index
  return d;
}

// Three protocol experts sharing (d, tokenization); order fixed as documented.
template <class Real>
struct ExpertBank {
  std::vector<std::unique_ptr<encoder::EncoderParams<Real>>> experts;
  bool frozen = true;

  encoder::EncoderParams<Real>& expert(int k) { return *experts.at(static_cast<std::size_t>(k)); }

  std::uint64_t value_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : experts) h ^= e->set.value_hash();
    return h;
  }
};

template <class Real>
ExpertBank<Real> make_expert_bank(const encoder::EncoderConfig& cfg, std::uint64_t seed) {
  ExpertBank<Real> bank;
  for (int k = 0; k < kNumExperts; ++k)
    bank.experts.push_back(std::make_unique<encoder::EncoderParams<Real>>(
        encoder::make_encoder<Real>(cfg, mix_seed(seed, static_cast<std::uint64_t>(k)),
                                    std::string("expert") + std::to_string(k))));
  return bank;
}

// h_MoE: DENSE = sum_k g_k h_k; TOP1 = bitwise the chosen expert's output.
template <class Real>
std::vector<Real> aggregate(const RouteDecision& d,
                            const std::vector<std::vector<Real>>& expert_outputs) {
  if (d.mode == AggregationMode::kTop1) {
    if (expert_outputs.size() <= static_cast<std::size_t>(d.chosen) ||
        expert_outputs[d.chosen].empty())
      throw MissingExpertOutput("top-1 expert output absent");
    return expert_outputs[d.chosen];
  }
  if (expert_outputs.size() != kNumExperts) throw MissingExpertOutput("dense needs all experts");
  const std::size_t dim = expert_outputs[0].size();
  std::vector<Real> out(dim, Real(0));
  for (int k = 0; k < kNumExperts; ++k) {
    if (expert_outputs[k].size() != dim) throw ShapeError("aggregate: expert width mismatch");
    for (std::size_t i = 0; i < dim; ++i)
      out[i] += static_cast<Real>(d.weights[k]) * expert_outputs[k][i];
  }
  return out;
}

struct InferStats {
  std::size_t expert_evals = 0;
  std::size_t router_evals = 0;
};

// TOP1 evaluates exactly one expert; DENSE evaluates all three.
template <class Real>
std::vector<Real> moe_infer(const specgen::Spectrogram& s, RouterParams<Real>& router,
                            ExpertBank<Real>& bank, AggregationMode mode,
                            InferStats* stats = nullptr, RouteDecision* decision_out = nullptr) {
  RouteDecision d = route(s, router, mode);
  if (stats) ++stats->router_evals;
  std::vector<std::vector<Real>> outputs(kNumExperts);
  if (mode == AggregationMode::kTop1) {
    outputs[d.chosen] = train::pooled_feature(bank.expert(d.chosen), s);
    if (stats) ++stats->expert_evals;
  } else {
    for (int k = 0; k < kNumExperts; ++k) {
      outputs[k] = train::pooled_feature(bank.expert(k), s);
      if (stats) ++stats->expert_evals;
    }
  }
  if (decision_out) *decision_out = d;
  return aggregate<Real>(d, outputs);
}

struct RouterTrainResult {
  train::FitResult fit;
  bool balanced = true;  // UnbalancedDataset warning flag when false
};

// Stage-2 training: experts frozen (and untouched by construction), router
// optimized with cross-entropy between g and the protocol label.
template <class Real>
RouterTrainResult train_router(RouterParams<Real>& router,
                               const std::vector<train::LabeledSample>& data,
                               const std::vector<std::size_t>& train_idx,
                               const std::vector<std::size_t>& val_idx,
                               const train::TrainConfig& cfg) {
  if (train_idx.empty()) throw ConfigError("train_router: empty train split");
  RouterTrainResult result;
  {
    std::vector<std::size_t> counts(kNumExperts, 0);
    for (auto i : train_idx) ++counts[static_cast<std::size_t>(data[i].class_id)];
    for (int k = 1; k < kNumExperts; ++k)
      if (counts[k] != counts[0]) result.balanced = false;
  }

  auto params = router.backbone.set.all();
  train::AdamW<Real> opt(params, cfg.adamw);

  auto batch_pass = [&](const std::vector<std::size_t>& batch, bool trainable) {
    const std::size_t bs = batch.size();
    const std::size_t block =
        static_cast<std::size_t>(train::detail::resolve_workers(cfg.workers));
    std::vector<std::unique_ptr<ad::Tape<Real>>> tapes(bs);
    std::vector<double> losses(bs);
    for (std::size_t base = 0; base < bs; base += block) {
      const std::size_t cnt = std::min(block, bs - base);
      train::detail::parallel_for(cnt, cfg.workers, [&](std::size_t j) {
        const std::size_t i = base + j;
        tapes[i] = std::make_unique<ad::Tape<Real>>();
        auto logits = route_logits(*tapes[i], router, *data[batch[i]].spec, trainable);
        auto ce = train::cross_entropy(logits, {data[batch[i]].class_id});
        losses[i] = static_cast<double>(ce.scalar());
        if (trainable)
          tapes[i]->backward(ad::scale(ce, Real(1) / static_cast<Real>(bs)));
      });
      for (std::size_t j = 0; j < cnt; ++j) {
        if (trainable) tapes[base + j]->collect_param_grads();
        tapes[base + j].reset();
      }
    }
    double acc = 0.0;
    for (double v : losses) acc += v;
    return acc / static_cast<double>(bs);
  };

  train::detail::EarlyStopper<Real> stopper(cfg.patience, cfg.min_delta);
  const std::vector<ad::ParamSet<Real>*> sets = {&router.backbone.set};
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto order = train_idx;
    Rng(mix_seed(cfg.seed, 0xB07, static_cast<std::uint64_t>(epoch))).shuffle(order);
    const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    double train_loss = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi));
      opt.zero_grad();
      train_loss += batch_pass(batch, true) * static_cast<double>(batch.size());
      lr = train::lr_at(cfg.schedule,
                        epoch + static_cast<double>(b + 1) / static_cast<double>(n_batches));
      opt.step(lr);
    }
    train_loss /= static_cast<double>(order.size());
    result.fit.curve.push_back({epoch, "train", 0.0, 0.0, train_loss, lr});
    double val_loss = train_loss;
    if (!val_idx.empty()) {
      std::vector<std::size_t> vb(val_idx.begin(), val_idx.end());
      val_loss = batch_pass(vb, false);
    }
    result.fit.curve.push_back({epoch, "val", 0.0, 0.0, val_loss, lr});
    result.fit.epochs_run = epoch + 1;
    if (stopper.observe(val_loss, epoch, sets)) break;
  }
  stopper.restore(sets);
  result.fit.best_val = stopper.best();
  result.fit.best_epoch = stopper.best_epoch();
  return result;
}

// Bundle manifest tying the router and expert checkpoints together.
inline nlohmann::json bundle_manifest(const std::string& router_ckpt,
                                      const std::vector<std::string>& expert_ckpts,
                                      AggregationMode default_mode) {
  if (expert_ckpts.size() != kNumExperts) throw ConfigError("bundle needs 3 expert checkpoints");
  nlohmann::json j;
  j["router_ckpt"] = router_ckpt;
  j["expert_ckpts"] = expert_ckpts;
  j["expert_order"] = {kExpertOrder[0], kExpertOrder[1], kExpertOrder[2]};
  j["mode_default"] = default_mode == AggregationMode::kTop1 ? "top1" : "dense";
  return j;
}

}  // namespace specforge::moe
