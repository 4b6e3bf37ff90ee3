#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specforge/encoder/model.hpp"
#include "specforge/specgen/dataset.hpp"
#include "specforge/train/loops.hpp"

#include <json.hpp>

namespace specforge {

inline nlohmann::json to_json(const train::TrainConfig& c) {
  nlohmann::json j;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["min_delta"] = c.min_delta;
  j["val_fraction"] = c.val_fraction;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["weights"] = {{"lambda_recon", c.weights.lambda_recon},
                  {"lambda_cont", c.weights.lambda_cont},
                  {"temperature", c.weights.temperature}};
  j["schedule"] = {{"base_lr", c.schedule.base_lr},
                   {"floor_lr", c.schedule.floor_lr},
                   {"warmup_epochs", c.schedule.warmup_epochs},
                   {"total_epochs", c.schedule.total_epochs}};
  j["adamw"] = {{"beta1", c.adamw.beta1},
                {"beta2", c.adamw.beta2},
                {"eps", c.adamw.eps},
                {"weight_decay", c.adamw.weight_decay},
                {"clip_norm", c.adamw.clip_norm}};
  j["encoder_lr_factor"] = c.encoder_lr_factor;
  j["lambda_cls"] = c.lambda_cls;
  return j;
}

inline train::TrainConfig train_config_from_json(const nlohmann::json& j) {
  train::TrainConfig c;
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("max_epochs")) c.max_epochs = j["max_epochs"].get<int>();
  if (j.contains("patience")) c.patience = j["patience"].get<int>();
  if (j.contains("min_delta")) c.min_delta = j["min_delta"].get<double>();
  if (j.contains("val_fraction")) c.val_fraction = j["val_fraction"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("workers")) c.workers = j["workers"].get<int>();
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    if (w.contains("lambda_recon")) c.weights.lambda_recon = w["lambda_recon"].get<double>();
    if (w.contains("lambda_cont")) c.weights.lambda_cont = w["lambda_cont"].get<double>();
    if (w.contains("temperature")) c.weights.temperature = w["temperature"].get<double>();
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    if (s.contains("base_lr")) c.schedule.base_lr = s["base_lr"].get<double>();
    if (s.contains("floor_lr")) c.schedule.floor_lr = s["floor_lr"].get<double>();
    if (s.contains("warmup_epochs")) c.schedule.warmup_epochs = s["warmup_epochs"].get<double>();
    if (s.contains("total_epochs")) c.schedule.total_epochs = s["total_epochs"].get<double>();
  }
  if (j.contains("adamw")) {
    const auto& a = j["adamw"];
    if (a.contains("beta1")) c.adamw.beta1 = a["beta1"].get<double>();
    if (a.contains("beta2")) c.adamw.beta2 = a["beta2"].get<double>();
    if (a.contains("eps")) c.adamw.eps = a["eps"].get<double>();
    if (a.contains("weight_decay")) c.adamw.weight_decay = a["weight_decay"].get<double>();
    if (a.contains("clip_norm")) c.adamw.clip_norm = a["clip_norm"].get<double>();
  }
  if (j.contains("encoder_lr_factor")) c.encoder_lr_factor = j["encoder_lr_factor"].get<double>();
  if (j.contains("lambda_cls")) c.lambda_cls = j["lambda_cls"].get<double>();
  return c;
}

struct EvalSection {
  std::string task = "modulation";
  std::size_t n_per_class = 16;
  int repeats = 5;
  std::string mode = "frozen";  // frozen | ft
  std::size_t n_test_per_class = 16;
};

inline nlohmann::json to_json(const EvalSection& e) {
  return {{"task", e.task},
          {"n_per_class", e.n_per_class},
          {"repeats", e.repeats},
          {"mode", e.mode},
          {"n_test_per_class", e.n_test_per_class}};
}

inline EvalSection eval_section_from_json(const nlohmann::json& j) {
  EvalSection e;
  if (j.contains("task")) e.task = j["task"].get<std::string>();
  if (j.contains("n_per_class")) e.n_per_class = j["n_per_class"].get<std::size_t>();
  if (j.contains("repeats")) e.repeats = j["repeats"].get<int>();
  if (j.contains("mode")) e.mode = j["mode"].get<std::string>();
  if (j.contains("n_test_per_class"))
    e.n_test_per_class = j["n_test_per_class"].get<std::size_t>();
  return e;
}

struct PathsSection {
  std::string dataset_manifest;
  std::string encoder_ckpt;
  std::string decoder_ckpt;
  std::string router_ckpt;
  std::vector<std::string> expert_ckpts;
};

inline nlohmann::json to_json(const PathsSection& p) {
  nlohmann::json j;
  if (!p.dataset_manifest.empty()) j["dataset_manifest"] = p.dataset_manifest;
  if (!p.encoder_ckpt.empty()) j["encoder_ckpt"] = p.encoder_ckpt;
  if (!p.decoder_ckpt.empty()) j["decoder_ckpt"] = p.decoder_ckpt;
  if (!p.router_ckpt.empty()) j["router_ckpt"] = p.router_ckpt;
  if (!p.expert_ckpts.empty()) j["expert_ckpts"] = p.expert_ckpts;
  return j;
}

inline PathsSection paths_from_json(const nlohmann::json& j) {
  PathsSection p;
  if (j.contains("dataset_manifest")) p.dataset_manifest = j["dataset_manifest"].get<std::string>();
  if (j.contains("encoder_ckpt")) p.encoder_ckpt = j["encoder_ckpt"].get<std::string>();
  if (j.contains("decoder_ckpt")) p.decoder_ckpt = j["decoder_ckpt"].get<std::string>();
  if (j.contains("router_ckpt")) p.router_ckpt = j["router_ckpt"].get<std::string>();
  if (j.contains("expert_ckpts"))
    p.expert_ckpts = j["expert_ckpts"].get<std::vector<std::string>>();
  return p;
}

// One config file drives every subcommand; sections may be omitted when a
// subcommand does not need them.
struct RunConfig {
  specgen::GenConfig dataset;
  encoder::EncoderConfig encoder;
  train::TrainConfig train;
  EvalSection eval;
  PathsSection paths;
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["dataset"] = specgen::to_json(c.dataset);
  j["encoder"] = encoder::to_json(c.encoder);
  j["train"] = to_json(c.train);
  j["eval"] = to_json(c.eval);
  const auto p = to_json(c.paths);
  if (!p.empty()) j["paths"] = p;
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.contains("dataset")) c.dataset = specgen::gen_config_from_json(j["dataset"]);
  if (j.contains("encoder")) c.encoder = encoder::encoder_config_from_json(j["encoder"]);
  if (j.contains("train")) c.train = train_config_from_json(j["train"]);
  if (j.contains("eval")) c.eval = eval_section_from_json(j["eval"]);
  if (j.contains("paths")) c.paths = paths_from_json(j["paths"]);
  return c;
}

}  // namespace specforge
