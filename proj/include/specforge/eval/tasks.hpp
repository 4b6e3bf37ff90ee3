#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "specforge/encoder/heads.hpp"
#include "specforge/eval/metrics.hpp"
#include "specforge/eval/split.hpp"
#include "specforge/moe/moe.hpp"
#include "specforge/specgen/spectrogram.hpp"
#include "specforge/train/loops.hpp"

namespace specforge::eval {

enum class Task { kModulation, kSnrDoppler, kMultiprotocol };

inline Task task_from_string(const std::string& s) {
  if (s == "modulation") return Task::kModulation;
  if (s == "snr-doppler" || s == "snr_doppler") return Task::kSnrDoppler;
  if (s == "multiprotocol") return Task::kMultiprotocol;
  throw ConfigError("unknown task: " + s);
}

// Task class key: modulation | (snr_db, mobility) | protocol.
struct ClassMap {
  std::vector<std::string> names;
  std::map<std::string, int> ids;

  int id_of(const std::string& key) const {
    auto it = ids.find(key);
    if (it == ids.end()) throw IndexError("unknown class key " + key);
    return it->second;
  }
  std::size_t size() const { return names.size(); }
};

inline std::string class_key(const specgen::Label& label, Task task) {
  switch (task) {
    case Task::kModulation: return baseband::to_string(label.modulation);
    case Task::kSnrDoppler:
      return std::to_string(static_cast<int>(std::lround(label.snr_db))) + "dB/" +
             channel::to_string(label.mobility);
    case Task::kMultiprotocol: return baseband::to_string(label.protocol);
  }
  return "?";
}

inline ClassMap build_class_map(const std::vector<specgen::Spectrogram>& records, Task task) {
  ClassMap map;
  for (const auto& r : records) {
    const std::string key = class_key(r.label, task);
    if (!map.ids.contains(key)) {
      map.ids[key] = 0;
      map.names.push_back(key);
    }
  }
  std::sort(map.names.begin(), map.names.end());
  for (std::size_t i = 0; i < map.names.size(); ++i) map.ids[map.names[i]] = static_cast<int>(i);
  return map;
}

inline std::vector<int> class_ids(const std::vector<specgen::Spectrogram>& records, Task task,
                                  const ClassMap& map) {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(map.id_of(class_key(r.label, task)));
  return out;
}

struct TaskSummary {
  std::vector<MetricReport> runs;
  double mean_macro_f1 = 0.0, std_macro_f1 = 0.0;
  double mean_accuracy = 0.0, std_accuracy = 0.0;
};

inline void finalize_summary(TaskSummary& s) {
  const double n = static_cast<double>(s.runs.size());
  if (n == 0.0) return;
  for (const auto& r : s.runs) {
    s.mean_macro_f1 += r.macro_f1;
    s.mean_accuracy += r.accuracy;
  }
  s.mean_macro_f1 /= n;
  s.mean_accuracy /= n;
  double vf = 0.0, va = 0.0;
  for (const auto& r : s.runs) {
    vf += (r.macro_f1 - s.mean_macro_f1) * (r.macro_f1 - s.mean_macro_f1);
    va += (r.accuracy - s.mean_accuracy) * (r.accuracy - s.mean_accuracy);
  }
  s.std_macro_f1 = std::sqrt(vf / n);
  s.std_accuracy = std::sqrt(va / n);
}

inline nlohmann::json to_json(const TaskSummary& s) {
  nlohmann::json j;
  j["mean_macro_f1"] = s.mean_macro_f1;
  j["std_macro_f1"] = s.std_macro_f1;
  j["mean_accuracy"] = s.mean_accuracy;
  j["std_accuracy"] = s.std_accuracy;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.runs) runs.push_back(to_json(r));
  j["runs"] = runs;
  return j;
}

// Head-on-frozen-encoder (LWM) or joint fine-tuning (LWM_FT) on a stratified
// few-shot split; repeated over seeds with mean +- std reporting.
template <class Real>
TaskSummary run_task(Task task, encoder::EncoderParams<Real>& enc,
                     encoder::DecoderParams<Real>& dec,
                     const std::vector<specgen::Spectrogram>& records,
                     train::FinetuneMode mode, std::size_t n_per_class, int repeats,
                     std::uint64_t base_seed, train::TrainConfig head_cfg,
                     const std::string& config_hash = "") {
  if (task == Task::kMultiprotocol)
    throw ConfigError("run_task: multiprotocol runs through run_router_task");
  const ClassMap map = build_class_map(records, task);
  const auto ids = class_ids(records, task, map);
  std::vector<const specgen::Spectrogram*> ptrs;
  ptrs.reserve(records.size());
  for (const auto& r : records) ptrs.push_back(&r);

  // frozen-encoder features do not depend on the split; compute once
  std::vector<std::vector<Real>> features;
  if (mode == train::FinetuneMode::kFrozen)
    features = train::pooled_features(enc, ptrs, head_cfg.workers);

  TaskSummary summary;
  for (int rep = 0; rep < repeats; ++rep) {
    const std::uint64_t seed = mix_seed(base_seed, static_cast<std::uint64_t>(rep));
    SplitPlan plan;
    plan.n_train_per_class = n_per_class;
    plan.n_val_per_class = std::max<std::size_t>(2, n_per_class / 2);
    plan.n_test_per_class = 16;
    plan.seed = seed;
    plan = stratified_split(ids, plan, map.names);

    train::TrainConfig cfg = head_cfg;
    cfg.seed = mix_seed(seed, 0x11);

    std::vector<int> predictions;
    if (mode == train::FinetuneMode::kFrozen) {
      auto cls = encoder::make_classifier<Real>(static_cast<int>(map.size()),
                                                mix_seed(seed, 0x22));
      train::train_classifier_frozen(cls, features, ids, plan.train, plan.val, cfg);
      for (auto i : plan.test) {
        ad::Tape<Real> tape;
        auto cb = encoder::bind(tape, cls, false);
        auto logits = encoder::classify(cb, tape.input({1, enc.cfg.dim}, features[i]));
        predictions.push_back(static_cast<int>(
            std::max_element(logits.value().begin(), logits.value().end()) -
            logits.value().begin()));
      }
    } else {
      // joint fine-tuning mutates the encoder; work on value clones
      auto enc_ft = encoder::make_encoder<Real>(enc.cfg, 0);
      enc_ft.set.copy_values_from(enc.set);
      auto dec_ft = encoder::make_decoder<Real>(dec.dim, dec.hidden, dec.out_dim, 0);
      dec_ft.set.copy_values_from(dec.set);
      auto proj = encoder::make_projector<Real>(enc.cfg.dim, enc.cfg.dim / 2,
                                                mix_seed(seed, 0x33));
      auto cls = encoder::make_classifier<Real>(static_cast<int>(map.size()),
                                                mix_seed(seed, 0x22));
      std::vector<train::LabeledSample> labeled(records.size());
      for (std::size_t i = 0; i < records.size(); ++i) labeled[i] = {&records[i], ids[i]};
      train::finetune_joint(enc_ft, dec_ft, proj, cls, labeled, plan.train, plan.val, cfg);
      for (auto i : plan.test) {
        const auto h = train::pooled_feature(enc_ft, records[i]);
        ad::Tape<Real> tape;
        auto cb = encoder::bind(tape, cls, false);
        auto logits = encoder::classify(cb, tape.input({1, enc.cfg.dim}, h));
        predictions.push_back(static_cast<int>(
            std::max_element(logits.value().begin(), logits.value().end()) -
            logits.value().begin()));
      }
    }

    std::vector<int> truth;
    truth.reserve(plan.test.size());
    for (auto i : plan.test) truth.push_back(ids[i]);
    summary.runs.push_back(
        make_report(make_confusion(truth, predictions, map.size()), seed, config_hash));
  }
  finalize_summary(summary);
  return summary;
}

// Multiprotocol task: train the router on a balanced mix, report
// protocol-selection metrics on the held-out split.
template <class Real>
TaskSummary run_router_task(const std::vector<specgen::Spectrogram>& records, int patch,
                            std::size_t n_per_class, int repeats, std::uint64_t base_seed,
                            train::TrainConfig router_cfg, const std::string& config_hash = "") {
  const ClassMap map = build_class_map(records, Task::kMultiprotocol);
  const auto ids = class_ids(records, Task::kMultiprotocol, map);

  TaskSummary summary;
  for (int rep = 0; rep < repeats; ++rep) {
    const std::uint64_t seed = mix_seed(base_seed, static_cast<std::uint64_t>(rep));
    SplitPlan plan;
    plan.n_train_per_class = n_per_class;
    plan.n_val_per_class = std::max<std::size_t>(4, n_per_class / 4);
    plan.n_test_per_class = 16;
    plan.seed = seed;
    plan = stratified_split(ids, plan, map.names);

    auto router = moe::make_router<Real>(patch, mix_seed(seed, 0x44));
    std::vector<train::LabeledSample> labeled(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) labeled[i] = {&records[i], ids[i]};
    train::TrainConfig cfg = router_cfg;
    cfg.seed = mix_seed(seed, 0x55);
    moe::train_router(router, labeled, plan.train, plan.val, cfg);

    std::vector<int> truth, pred;
    for (auto i : plan.test) {
      truth.push_back(ids[i]);
      pred.push_back(moe::route(records[i], router).chosen);
    }
    summary.runs.push_back(
        make_report(make_confusion(truth, pred, map.size()), seed, config_hash));
  }
  finalize_summary(summary);
  return summary;
}

// One row per sample: id, label fields, then the d-dimensional embedding.
template <class Real>
void export_embeddings(encoder::EncoderParams<Real>& enc,
                       const std::vector<specgen::Spectrogram>& records,
                       const std::string& path, int workers = 0) {
  std::vector<const specgen::Spectrogram*> ptrs;
  ptrs.reserve(records.size());
  for (const auto& r : records) ptrs.push_back(&r);
  const auto features = train::pooled_features(enc, ptrs, workers);

  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "sample_id\tprotocol\tmodulation\tsnr_db\tmobility\tscenario_id\tseed";
  for (int j = 0; j < enc.cfg.dim; ++j) f << "\te" << j;
  f << "\n";
  f.precision(9);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& l = records[i].label;
    f << i << "\t" << baseband::to_string(l.protocol) << "\t" << baseband::to_string(l.modulation)
      << "\t" << l.snr_db << "\t" << channel::to_string(l.mobility) << "\t" << l.scenario_id
      << "\t" << l.seed;
    for (const auto v : features[i]) f << "\t" << static_cast<double>(v);
    f << "\n";
  }
  if (!f) throw IoError("short write to " + path);
}

}  // namespace specforge::eval
