#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "specforge/autodiff/params.hpp"
#include "specforge/autodiff/tensor.hpp"
#include "specforge/core/rng.hpp"
#include "specforge/encoder/heads.hpp"
#include "specforge/encoder/model.hpp"
#include "specforge/specgen/spectrogram.hpp"
#include "specforge/train/losses.hpp"
#include "specforge/train/optimizer.hpp"
#include "specforge/train/schedule.hpp"

namespace specforge::train {

struct TrainConfig {
  int batch_size = 16;
  int max_epochs = 100;
  int patience = 10;
  double min_delta = 1e-4;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = hardware concurrency
  LossWeights weights;
  ScheduleConfig schedule;
  AdamWConfig adamw;
  double encoder_lr_factor = 0.1;  // FT mode reduced encoder lr
  double lambda_cls = 1.0;
};

struct CurveRow {
  int epoch;
  std::string split;  // "train" | "val"
  double l_recon = 0.0, l_cont = 0.0, l_cls = 0.0, lr = 0.0;
};
using LossCurve = std::vector<CurveRow>;

inline void write_curve_csv(const std::string& path, const LossCurve& curve) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "epoch,split,l_recon,l_cont,l_cls,lr\n";
  for (const auto& r : curve)
    f << r.epoch << "," << r.split << "," << r.l_recon << "," << r.l_cont << "," << r.l_cls << ","
      << r.lr << "\n";
}

namespace detail {

inline int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs f(i) for i in [0, n) on up to `workers` threads. Each i must be
// independent; results land in caller-provided slots, so the outcome does
// not depend on the thread count.
template <class F>
void parallel_for(std::size_t n, int workers, F&& f) {
  const int k = std::min<std::size_t>(static_cast<std::size_t>(resolve_workers(workers)), n);
  if (k <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(k));
  for (int t = 0; t < k; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        f(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

template <class Real>
std::vector<Real> gather_target_rows(const std::vector<Real>& values, std::size_t width,
                                     const std::vector<std::size_t>& idx) {
  std::vector<Real> out(idx.size() * width);
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(idx[r] * width),
              values.begin() + static_cast<std::ptrdiff_t>((idx[r] + 1) * width),
              out.begin() + static_cast<std::ptrdiff_t>(r * width));
  return out;
}

}  // namespace detail

// Masked-reconstruction graph for one spectrogram. Returns the recon loss;
// optionally exposes the pooled representation for joint objectives.
template <class Real>
struct ReconGraph {
  ad::Var<Real> loss;
  ad::Var<Real> pooled;
  double loss_value = 0.0;
};

template <class Real>
ReconGraph<Real> build_recon_graph(ad::Tape<Real>& tape, encoder::EncoderParams<Real>& enc,
                                   encoder::DecoderParams<Real>& dec, bool trainable,
                                   const specgen::Spectrogram& s, const encoder::MaskSpec& mask,
                                   bool want_pooled = false) {
  const auto patch_vals = encoder::patchify<Real>(s, enc.cfg.patch);
  const int p2 = enc.cfg.patch * enc.cfg.patch;
  const int n = static_cast<int>(patch_vals.size()) / p2;

  auto eb = encoder::bind(tape, enc, trainable);
  auto db = encoder::bind(tape, dec, trainable);
  auto patches = tape.input({n, p2}, patch_vals);
  auto x = encoder::embed_tokens(eb, patches);

  std::vector<Real> targets;
  if (enc.cfg.recon_target == encoder::ReconTarget::kRawPatch) {
    targets = detail::gather_target_rows(patch_vals, static_cast<std::size_t>(p2), mask.mask_set);
  } else {
    // embedding target x_i, gradient blocked through the target
    targets = detail::gather_target_rows(x.value(), static_cast<std::size_t>(enc.cfg.dim),
                                         mask.mask_set);
  }

  auto xm = encoder::apply_mask(eb, x, mask);
  auto z0 = encoder::add_positions(eb, xm);
  auto zl = encoder::encoder_forward(eb, z0);
  ReconGraph<Real> g;
  auto xhat = encoder::decode_masked(db, zl, mask);
  g.loss = loss_recon(xhat, targets);
  g.loss_value = static_cast<double>(g.loss.scalar());
  if (want_pooled) g.pooled = encoder::pool_tokens(zl);
  return g;
}

// Unmasked forward pass -> pooled mean token (the downstream feature).
template <class Real>
std::vector<Real> pooled_feature(encoder::EncoderParams<Real>& enc,
                                 const specgen::Spectrogram& s) {
  ad::Tape<Real> tape;
  const auto patch_vals = encoder::patchify<Real>(s, enc.cfg.patch);
  const int p2 = enc.cfg.patch * enc.cfg.patch;
  const int n = static_cast<int>(patch_vals.size()) / p2;
  auto eb = encoder::bind(tape, enc, /*trainable=*/false);
  auto x = encoder::embed_tokens(eb, tape.input({n, p2}, patch_vals));
  auto zl = encoder::encoder_forward(eb, encoder::add_positions(eb, x));
  return encoder::pool_tokens(zl).value();
}

template <class Real>
std::vector<std::vector<Real>> pooled_features(encoder::EncoderParams<Real>& enc,
                                               const std::vector<const specgen::Spectrogram*>& xs,
                                               int workers = 0) {
  std::vector<std::vector<Real>> out(xs.size());
  detail::parallel_for(xs.size(), workers,
                       [&](std::size_t i) { out[i] = pooled_feature(enc, *xs[i]); });
  return out;
}

struct FitResult {
  LossCurve curve;
  double best_val = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
};

namespace detail {

// Deterministic train/val split of [0, n): shuffle once, carve off the tail.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_val(
    std::size_t n, double val_fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(mix_seed(seed, 0x51));
  rng.shuffle(idx);
  const auto n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(n));
  std::vector<std::size_t> val(idx.end() - static_cast<std::ptrdiff_t>(n_val), idx.end());
  idx.resize(n - n_val);
  return {idx, val};
}

template <class Real>
class EarlyStopper {
 public:
  EarlyStopper(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  // returns true when training should stop
  bool observe(double val_loss, int epoch, const std::vector<ad::ParamSet<Real>*>& sets) {
    if (best_epoch_ < 0 || val_loss < best_ - min_delta_) {
      best_ = val_loss;
      best_epoch_ = epoch;
      snapshots_.clear();
      for (auto* s : sets) snapshots_.push_back(s->snapshot());
      misses_ = 0;
      return false;
    }
    return ++misses_ >= patience_;
  }

  void restore(const std::vector<ad::ParamSet<Real>*>& sets) const {
    if (best_epoch_ < 0) return;
    for (std::size_t i = 0; i < sets.size(); ++i) sets[i]->restore(snapshots_[i]);
  }

  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double min_delta_;
  double best_ = 0.0;
  int best_epoch_ = -1;
  int misses_ = 0;
  std::vector<std::vector<std::vector<Real>>> snapshots_;
};

}  // namespace detail

// Self-supervised masked-spectrogram pretraining (reconstruction loss only).
// Deterministic given cfg.seed, independent of the worker count.
template <class Real>
FitResult pretrain(encoder::EncoderParams<Real>& enc, encoder::DecoderParams<Real>& dec,
                   const std::vector<const specgen::Spectrogram*>& data, const TrainConfig& cfg) {
  if (data.empty()) throw ConfigError("pretrain: empty dataset");
  auto [train_idx, val_idx] = detail::split_train_val(data.size(), cfg.val_fraction, cfg.seed);
  if (train_idx.empty()) throw ConfigError("pretrain: empty train split");

  std::vector<ad::Param<Real>*> params = enc.set.all();
  for (auto* p : dec.set.all()) params.push_back(p);
  AdamW<Real> opt(params, cfg.adamw);

  auto epoch_val_loss = [&](std::vector<std::size_t> const& idx, int epoch) {
    if (idx.empty()) return 0.0;
    std::vector<double> losses(idx.size());
    detail::parallel_for(idx.size(), cfg.workers, [&](std::size_t i) {
      ad::Tape<Real> tape;
      const auto& s = *data[idx[i]];
      encoder::PatchGrid grid;
      encoder::patchify<Real>(*data[idx[i]], enc.cfg.patch, &grid);
      // fixed per-sample validation masks keep the metric comparable
      const auto mask = encoder::sample_mask(grid.n(), enc.cfg.mask_ratio,
                                             mix_seed(cfg.seed, 0x7A1, idx[i]));
      (void)epoch;
      losses[i] =
          build_recon_graph(tape, enc, dec, /*trainable=*/false, s, mask).loss_value;
    });
    double acc = 0.0;
    for (double v : losses) acc += v;
    return acc / static_cast<double>(losses.size());
  };

  FitResult result;
  detail::EarlyStopper<Real> stopper(cfg.patience, cfg.min_delta);
  const std::vector<ad::ParamSet<Real>*> sets = {&enc.set, &dec.set};

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto order = train_idx;
    Rng(mix_seed(cfg.seed, 0xE0, static_cast<std::uint64_t>(epoch))).shuffle(order);

    const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    double train_loss = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      const std::size_t bs = hi - lo;

      for (auto* p : params) p->zero_grad();
      // bounded in-flight tapes: parallel build+backward per block, then
      // serial, ordered gradient collection
      const std::size_t block = static_cast<std::size_t>(detail::resolve_workers(cfg.workers));
      std::vector<std::unique_ptr<ad::Tape<Real>>> tapes(bs);
      std::vector<double> losses(bs);
      for (std::size_t base = 0; base < bs; base += block) {
        const std::size_t cnt = std::min(block, bs - base);
        detail::parallel_for(cnt, cfg.workers, [&](std::size_t j) {
          const std::size_t i = base + j;
          const std::size_t sample = order[lo + i];
          tapes[i] = std::make_unique<ad::Tape<Real>>();
          encoder::PatchGrid grid;
          encoder::patchify<Real>(*data[sample], enc.cfg.patch, &grid);
          const auto mask = encoder::sample_mask(
              grid.n(), enc.cfg.mask_ratio,
              mix_seed(cfg.seed, 0x3A5C, static_cast<std::uint64_t>(epoch), sample));
          auto g = build_recon_graph(*tapes[i], enc, dec, /*trainable=*/true, *data[sample], mask);
          losses[i] = g.loss_value;
          tapes[i]->backward(ad::scale(g.loss, Real(1) / static_cast<Real>(bs)));
        });
        for (std::size_t j = 0; j < cnt; ++j) {
          tapes[base + j]->collect_param_grads();
          tapes[base + j].reset();
        }
      }
      for (double v : losses) train_loss += v;

      const double epoch_frac =
          epoch + static_cast<double>(b + 1) / static_cast<double>(n_batches);
      lr = lr_at(cfg.schedule, epoch_frac);
      opt.step(lr);
    }
    train_loss /= static_cast<double>(order.size());
    result.curve.push_back({epoch, "train", train_loss, 0.0, 0.0, lr});

    const double val_loss = epoch_val_loss(val_idx, epoch);
    result.curve.push_back({epoch, "val", val_loss, 0.0, 0.0, lr});
    result.epochs_run = epoch + 1;
    if (stopper.observe(val_loss, epoch, sets)) break;
  }
  stopper.restore(sets);
  result.best_val = stopper.best();
  result.best_epoch = stopper.best_epoch();
  return result;
}

// ---------------------------------------------------------------------------
// supervised fine-tuning

enum class FinetuneMode { kFrozen, kFt };

struct LabeledSample {
  const specgen::Spectrogram* spec = nullptr;
  int class_id = 0;
};

namespace detail {

// Stratified batches: pairs of same-class samples are interleaved so every
// class present in a batch has >= 2 members whenever the data allows it.
inline std::vector<std::vector<std::size_t>> contrastive_batches(
    const std::vector<LabeledSample>& data, const std::vector<std::size_t>& idx, int batch_size,
    std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (auto i : idx) by_class[data[i].class_id].push_back(i);
  Rng rng(seed);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> singles;
  for (auto& [cls, members] : by_class) {
    rng.shuffle(members);
    std::size_t i = 0;
    for (; i + 1 < members.size(); i += 2) pairs.push_back({members[i], members[i + 1]});
    if (i < members.size()) singles.push_back(members[i]);
  }
  rng.shuffle(pairs);
  std::vector<std::vector<std::size_t>> batches;
  const std::size_t pairs_per_batch = std::max<std::size_t>(1, batch_size / 2);
  for (std::size_t p = 0; p < pairs.size(); p += pairs_per_batch) {
    std::vector<std::size_t> batch;
    for (std::size_t q = p; q < std::min(pairs.size(), p + pairs_per_batch); ++q) {
      batch.push_back(pairs[q].first);
      batch.push_back(pairs[q].second);
    }
    batches.push_back(std::move(batch));
  }
  if (batches.empty()) batches.push_back({});
  for (auto s : singles) batches.back().push_back(s);
  if (batches.back().empty()) batches.pop_back();
  return batches;
}

}  // namespace detail

// FROZEN mode: the encoder is never touched; the classifier trains on cached
// pooled features with plain cross-entropy.
template <class Real>
FitResult train_classifier_frozen(encoder::ClassifierParams<Real>& cls,
                                  const std::vector<std::vector<Real>>& features,
                                  const std::vector<int>& labels,
                                  const std::vector<std::size_t>& train_idx,
                                  const std::vector<std::size_t>& val_idx,
                                  const TrainConfig& cfg) {
  if (train_idx.empty()) throw ConfigError("train_classifier_frozen: empty train split");
  const int d = static_cast<int>(features[0].size());
  AdamW<Real> opt(cls.set.all(), cfg.adamw);

  auto batch_loss = [&](const std::vector<std::size_t>& batch, bool trainable) {
    ad::Tape<Real> tape;
    auto cb = encoder::bind(tape, cls, trainable);
    std::vector<ad::Var<Real>> logit_rows;
    std::vector<int> batch_labels;
    logit_rows.reserve(batch.size());
    for (auto i : batch) {
      logit_rows.push_back(encoder::classify(cb, tape.input({1, d}, features[i])));
      batch_labels.push_back(labels[i]);
    }
    // stack rows: [B x C]
    std::vector<ad::Var<Real>> cols;  // concat along rows via transpose trick
    auto logits = logit_rows[0];
    if (logit_rows.size() > 1) {
      // concat_cols on transposed rows, then transpose back
      std::vector<ad::Var<Real>> t_rows;
      t_rows.reserve(logit_rows.size());
      for (auto& r : logit_rows) t_rows.push_back(ad::transpose(r));
      logits = ad::transpose(ad::concat_cols(t_rows));
    }
    auto ce = cross_entropy(logits, batch_labels);
    const double value = static_cast<double>(ce.scalar());
    if (trainable) tape.backward(ce);
    if (trainable) tape.collect_param_grads();
    return value;
  };

  FitResult result;
  detail::EarlyStopper<Real> stopper(cfg.patience, cfg.min_delta);
  const std::vector<ad::ParamSet<Real>*> sets = {&cls.set};
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    auto order = train_idx;
    Rng(mix_seed(cfg.seed, 0xF1, static_cast<std::uint64_t>(epoch))).shuffle(order);
    const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    double train_loss = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi));
      opt.zero_grad();
      train_loss += batch_loss(batch, true) * static_cast<double>(batch.size());
      lr = lr_at(cfg.schedule,
                 epoch + static_cast<double>(b + 1) / static_cast<double>(n_batches));
      opt.step(lr);
    }
    train_loss /= static_cast<double>(order.size());
    result.curve.push_back({epoch, "train", 0.0, 0.0, train_loss, lr});

    double val_loss = train_loss;
    if (!val_idx.empty()) {
      std::vector<std::size_t> vbatch(val_idx.begin(), val_idx.end());
      val_loss = batch_loss(vbatch, false);
    }
    result.curve.push_back({epoch, "val", 0.0, 0.0, val_loss, lr});
    result.epochs_run = epoch + 1;
    if (stopper.observe(val_loss, epoch, sets)) break;
  }
  stopper.restore(sets);
  result.best_val = stopper.best();
  result.best_epoch = stopper.best_epoch();
  return result;
}

// FT mode: joint objective L = lr*L_recon + lc*L_supcon + lambda_cls*CE with
// the encoder trained at a reduced learning rate. The cross-sample SupCon
// term is evaluated on a join graph over pooled representations; its
// gradient is then pushed through each sample's (recomputed) encoder graph.
template <class Real>
FitResult finetune_joint(encoder::EncoderParams<Real>& enc, encoder::DecoderParams<Real>& dec,
                         encoder::ProjectorParams<Real>& proj,
                         encoder::ClassifierParams<Real>& cls,
                         const std::vector<LabeledSample>& data,
                         const std::vector<std::size_t>& train_idx,
                         const std::vector<std::size_t>& val_idx, const TrainConfig& cfg) {
  if (train_idx.empty()) throw ConfigError("finetune_joint: empty train split");
  AdamWConfig enc_cfg = cfg.adamw;
  enc_cfg.lr_scale = cfg.encoder_lr_factor;
  AdamW<Real> opt_enc(enc.set.all(), enc_cfg);
  std::vector<ad::Param<Real>*> head_params = dec.set.all();
  for (auto* p : proj.set.all()) head_params.push_back(p);
  for (auto* p : cls.set.all()) head_params.push_back(p);
  AdamW<Real> opt_heads(head_params, cfg.adamw);

  const int d = enc.cfg.dim;

  encoder::PatchGrid grid;
  encoder::patchify<Real>(*data[train_idx[0]].spec, enc.cfg.patch, &grid);
  const std::size_t n_tokens = grid.n();

  struct BatchLosses {
    double recon = 0.0, cont = 0.0, ce = 0.0;
  };

  // evaluate (and optionally train on) one batch
  auto run_batch = [&](const std::vector<std::size_t>& batch, int epoch, bool trainable) {
    const std::size_t bs = batch.size();
    std::vector<encoder::MaskSpec> masks(bs);
    for (std::size_t i = 0; i < bs; ++i)
      masks[i] = encoder::sample_mask(
          n_tokens, enc.cfg.mask_ratio,
          mix_seed(cfg.seed, 0xFE, static_cast<std::uint64_t>(epoch), batch[i]));

    // phase A: forward-only, collect pooled features and recon values
    std::vector<std::vector<Real>> pooled(bs);
    std::vector<double> recon_vals(bs);
    detail::parallel_for(bs, cfg.workers, [&](std::size_t i) {
      ad::Tape<Real> tape;
      auto g = build_recon_graph(tape, enc, dec, /*trainable=*/false, *data[batch[i]].spec,
                                 masks[i], /*want_pooled=*/true);
      pooled[i] = g.pooled.value();
      recon_vals[i] = g.loss_value;
    });

    // phase B: join graph over pooled features -> SupCon + CE
    std::vector<Real> h_flat(bs * static_cast<std::size_t>(d));
    std::vector<int> batch_labels(bs);
    for (std::size_t i = 0; i < bs; ++i) {
      std::copy(pooled[i].begin(), pooled[i].end(),
                h_flat.begin() + static_cast<std::ptrdiff_t>(i * d));
      batch_labels[i] = data[batch[i]].class_id;
    }
    ad::Tape<Real> join;
    auto h = join.input({static_cast<int>(bs), d}, h_flat, /*requires_grad=*/trainable);
    auto pb = encoder::bind(join, proj, trainable);
    auto cb = encoder::bind(join, cls, trainable);
    auto z = encoder::project_contrastive(pb, h);
    auto l_cont = bs >= 2 ? loss_supcon(z, batch_labels, cfg.weights.temperature)
                          : join.input({1}, {Real(0)});
    std::vector<ad::Var<Real>> t_rows;
    for (std::size_t i = 0; i < bs; ++i)
      t_rows.push_back(
          ad::transpose(encoder::classify(cb, ad::slice_rows(h, static_cast<int>(i),
                                                             static_cast<int>(i) + 1))));
    auto logits = ad::transpose(ad::concat_cols(t_rows));
    auto ce = cross_entropy(logits, batch_labels);
    auto join_loss = ad::add(ad::scale(l_cont, static_cast<Real>(cfg.weights.lambda_cont)),
                             ad::scale(ce, static_cast<Real>(cfg.lambda_cls)));

    BatchLosses out;
    for (double v : recon_vals) out.recon += v;
    out.recon /= static_cast<double>(bs);
    out.cont = static_cast<double>(l_cont.scalar());
    out.ce = static_cast<double>(ce.scalar());
    if (!trainable) return out;

    join.backward(join_loss);
    join.collect_param_grads();  // projector + classifier grads
    const auto& h_grad = h.node()->grad;

    // phase C: rebuild each sample graph, seed pooled with dL/dh_i and the
    // recon root with lambda_recon / B, sweep, collect in order
    const std::size_t block = static_cast<std::size_t>(detail::resolve_workers(cfg.workers));
    std::vector<std::unique_ptr<ad::Tape<Real>>> tapes(bs);
    for (std::size_t base = 0; base < bs; base += block) {
      const std::size_t cnt = std::min(block, bs - base);
      detail::parallel_for(cnt, cfg.workers, [&](std::size_t j) {
        const std::size_t i = base + j;
        tapes[i] = std::make_unique<ad::Tape<Real>>();
        auto g = build_recon_graph(*tapes[i], enc, dec, /*trainable=*/true, *data[batch[i]].spec,
                                   masks[i], /*want_pooled=*/true);
        std::vector<Real> seed_grad(h_grad.begin() + static_cast<std::ptrdiff_t>(i * d),
                                    h_grad.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
        tapes[i]->seed(g.pooled, seed_grad);
        tapes[i]->backward(ad::scale(
            g.loss, static_cast<Real>(cfg.weights.lambda_recon / static_cast<double>(bs))));
      });
      for (std::size_t j = 0; j < cnt; ++j) {
        tapes[base + j]->collect_param_grads();
        tapes[base + j].reset();
      }
    }
    return out;
  };

  FitResult result;
  detail::EarlyStopper<Real> stopper(cfg.patience, cfg.min_delta);
  const std::vector<ad::ParamSet<Real>*> sets = {&enc.set, &dec.set, &proj.set, &cls.set};

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto batches = detail::contrastive_batches(
        data, train_idx, cfg.batch_size, mix_seed(cfg.seed, 0xB0, static_cast<std::uint64_t>(epoch)));
    BatchLosses train_acc;
    double lr = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      if (batches[b].empty()) continue;
      opt_enc.zero_grad();
      opt_heads.zero_grad();
      const auto losses = run_batch(batches[b], epoch, /*trainable=*/true);
      train_acc.recon += losses.recon * static_cast<double>(batches[b].size());
      train_acc.cont += losses.cont;
      train_acc.ce += losses.ce * static_cast<double>(batches[b].size());
      count += batches[b].size();
      lr = lr_at(cfg.schedule,
                 epoch + static_cast<double>(b + 1) / static_cast<double>(batches.size()));
      opt_enc.step(lr);
      opt_heads.step(lr);
    }
    result.curve.push_back({epoch, "train", train_acc.recon / count,
                            train_acc.cont / static_cast<double>(batches.size()),
                            train_acc.ce / count, lr});

    double val_total = 0.0;
    if (!val_idx.empty()) {
      std::vector<std::size_t> vbatch(val_idx.begin(), val_idx.end());
      const auto vl = run_batch(vbatch, epoch, /*trainable=*/false);
      val_total = cfg.weights.lambda_recon * vl.recon + cfg.weights.lambda_cont * vl.cont +
                  cfg.lambda_cls * vl.ce;
      result.curve.push_back({epoch, "val", vl.recon, vl.cont, vl.ce, lr});
    } else {
      val_total = cfg.weights.lambda_recon * train_acc.recon / count;
      result.curve.push_back({epoch, "val", 0.0, 0.0, 0.0, lr});
    }
    result.epochs_run = epoch + 1;
    if (stopper.observe(val_total, epoch, sets)) break;
  }
  stopper.restore(sets);
  result.best_val = stopper.best();
  result.best_epoch = stopper.best_epoch();
  return result;
}

}  // namespace specforge::train
