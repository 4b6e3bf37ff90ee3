// specforge command-line interface: dataset synthesis, masked pretraining,
// supervised fine-tuning, router training, few-shot evaluation, embedding
// export and spectrogram rendering.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "specforge/config.hpp"
#include "specforge/eval/render.hpp"
#include "specforge/eval/tasks.hpp"
#include "specforge/moe/moe.hpp"
#include "specforge/specgen/dataset.hpp"

namespace fs = std::filesystem;
using namespace specforge;

namespace {

struct Cli {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs/out";
};

RunConfig load_config(const Cli& cli) {
  if (cli.config_path.empty()) throw ConfigError("--config is required");
  std::ifstream f(cli.config_path);
  if (!f) throw ConfigError("cannot open config " + cli.config_path);
  RunConfig cfg = run_config_from_json(nlohmann::json::parse(f));
  if (cli.seed) {
    cfg.dataset.master_seed = *cli.seed;
    cfg.train.seed = *cli.seed;
  }
  return cfg;
}

std::string write_resolved_config(const Cli& cli, const RunConfig& cfg,
                                  const std::string& command) {
  fs::create_directories(cli.out_dir);
  nlohmann::json j = to_json(cfg);
  j["command"] = command;
  const std::string hash = specgen::hash_hex(specgen::config_hash(j));
  j["config_hash"] = hash;
  std::ofstream f(fs::path(cli.out_dir) / "resolved_config.json");
  f << j.dump(2) << "\n";
  return hash;
}

specgen::Dataset load_dataset_or_throw(const RunConfig& cfg) {
  if (cfg.paths.dataset_manifest.empty())
    throw ConfigError("paths.dataset_manifest is required for this command");
  return specgen::load_dataset(cfg.paths.dataset_manifest);
}

void save_encoder(const std::string& path, encoder::EncoderParams<float>& enc) {
  nlohmann::json meta;
  meta["kind"] = "encoder";
  meta["encoder"] = encoder::to_json(enc.cfg);
  ad::save_checkpoint(path, enc.set, meta);
}

encoder::EncoderParams<float> load_encoder(const std::string& path) {
  const auto meta = ad::read_checkpoint_meta(path);
  if (!meta.contains("encoder")) throw ConfigError("not an encoder checkpoint: " + path);
  auto enc = encoder::make_encoder<float>(encoder::encoder_config_from_json(meta["encoder"]), 0);
  ad::load_checkpoint(path, enc.set);
  return enc;
}

void save_decoder(const std::string& path, encoder::DecoderParams<float>& dec) {
  nlohmann::json meta;
  meta["kind"] = "decoder";
  meta["dims"] = {{"dim", dec.dim}, {"hidden", dec.hidden}, {"out_dim", dec.out_dim}};
  ad::save_checkpoint(path, dec.set, meta);
}

encoder::DecoderParams<float> load_decoder(const std::string& path) {
  const auto meta = ad::read_checkpoint_meta(path);
  if (!meta.contains("dims")) throw ConfigError("not a decoder checkpoint: " + path);
  auto dec = encoder::make_decoder<float>(meta["dims"]["dim"].get<int>(),
                                          meta["dims"]["hidden"].get<int>(),
                                          meta["dims"]["out_dim"].get<int>(), 0);
  ad::load_checkpoint(path, dec.set);
  return dec;
}

int decoder_out_dim(const encoder::EncoderConfig& cfg) {
  return cfg.recon_target == encoder::ReconTarget::kRawPatch ? cfg.patch * cfg.patch : cfg.dim;
}

int cmd_generate(const Cli& cli, RunConfig cfg) {
  const auto hash = write_resolved_config(cli, cfg, "generate");
  const auto out = (fs::path(cli.out_dir) / "dataset").string();
  const auto manifest = specgen::generate_dataset(cfg.dataset, out);
  std::printf("generate: %zu records -> %s (config %s)\n",
              manifest.at("count").get<std::size_t>(), out.c_str(), hash.c_str());
  return 0;
}

int cmd_pretrain(const Cli& cli, RunConfig cfg) {
  const auto hash = write_resolved_config(cli, cfg, "pretrain");
  const auto ds = load_dataset_or_throw(cfg);
  std::vector<const specgen::Spectrogram*> data;
  data.reserve(ds.records.size());
  for (const auto& r : ds.records) data.push_back(&r);

  auto enc = encoder::make_encoder<float>(cfg.encoder, mix_seed(cfg.train.seed, 0x1));
  auto dec = encoder::make_decoder<float>(cfg.encoder.dim, cfg.encoder.ffn_dim(),
                                          decoder_out_dim(cfg.encoder),
                                          mix_seed(cfg.train.seed, 0x2));
  cfg.train.weights.lambda_cont = 0.0;  // pretraining objective: reconstruction only
  const auto result = train::pretrain(enc, dec, data, cfg.train);

  save_encoder((fs::path(cli.out_dir) / "encoder.sfck").string(), enc);
  save_decoder((fs::path(cli.out_dir) / "decoder.sfck").string(), dec);
  train::write_curve_csv((fs::path(cli.out_dir) / "pretrain_curve.csv").string(), result.curve);
  std::printf("pretrain: %d epochs, best val L_recon %.6f at epoch %d (config %s)\n",
              result.epochs_run, result.best_val, result.best_epoch, hash.c_str());
  return 0;
}

int cmd_finetune(const Cli& cli, RunConfig cfg, const std::string& mode) {
  const auto hash = write_resolved_config(cli, cfg, "finetune");
  const auto ds = load_dataset_or_throw(cfg);
  if (cfg.paths.encoder_ckpt.empty()) throw ConfigError("paths.encoder_ckpt is required");
  auto enc = load_encoder(cfg.paths.encoder_ckpt);

  const auto task = eval::task_from_string(cfg.eval.task);
  const auto map = eval::build_class_map(ds.records, task);
  const auto ids = eval::class_ids(ds.records, task, map);
  eval::SplitPlan plan;
  plan.n_train_per_class = cfg.eval.n_per_class;
  plan.n_val_per_class = std::max<std::size_t>(2, cfg.eval.n_per_class / 2);
  plan.n_test_per_class = cfg.eval.n_test_per_class;
  plan.seed = cfg.train.seed;
  plan = eval::stratified_split(ids, plan, map.names);

  auto cls = encoder::make_classifier<float>(static_cast<int>(map.size()),
                                             mix_seed(cfg.train.seed, 0x3));
  std::vector<int> predictions;
  train::FitResult fit;
  if (mode == "frozen") {
    std::vector<const specgen::Spectrogram*> ptrs;
    for (const auto& r : ds.records) ptrs.push_back(&r);
    const auto features = train::pooled_features(enc, ptrs, cfg.train.workers);
    fit = train::train_classifier_frozen(cls, features, ids, plan.train, plan.val, cfg.train);
    for (auto i : plan.test) {
      ad::Tape<float> tape;
      auto cb = encoder::bind(tape, cls, false);
      auto logits = encoder::classify(cb, tape.input({1, enc.cfg.dim}, features[i]));
      predictions.push_back(static_cast<int>(
          std::max_element(logits.value().begin(), logits.value().end()) -
          logits.value().begin()));
    }
  } else if (mode == "ft") {
    auto dec = cfg.paths.decoder_ckpt.empty()
                   ? encoder::make_decoder<float>(enc.cfg.dim, enc.cfg.ffn_dim(),
                                                  decoder_out_dim(enc.cfg),
                                                  mix_seed(cfg.train.seed, 0x4))
                   : load_decoder(cfg.paths.decoder_ckpt);
    auto proj = encoder::make_projector<float>(enc.cfg.dim, enc.cfg.dim / 2,
                                               mix_seed(cfg.train.seed, 0x5));
    std::vector<train::LabeledSample> labeled(ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) labeled[i] = {&ds.records[i], ids[i]};
    fit = train::finetune_joint(enc, dec, proj, cls, labeled, plan.train, plan.val, cfg.train);
    save_decoder((fs::path(cli.out_dir) / "decoder_ft.sfck").string(), dec);
    nlohmann::json pmeta;
    pmeta["kind"] = "projector";
    ad::save_checkpoint((fs::path(cli.out_dir) / "projector.sfck").string(), proj.set, pmeta);
    for (auto i : plan.test) {
      const auto h = train::pooled_feature(enc, ds.records[i]);
      ad::Tape<float> tape;
      auto cb = encoder::bind(tape, cls, false);
      auto logits = encoder::classify(cb, tape.input({1, enc.cfg.dim}, h));
      predictions.push_back(static_cast<int>(
          std::max_element(logits.value().begin(), logits.value().end()) -
          logits.value().begin()));
    }
  } else {
    throw ConfigError("finetune mode must be frozen or ft");
  }

  save_encoder((fs::path(cli.out_dir) / (mode == "ft" ? "encoder_ft.sfck" : "encoder.sfck"))
                   .string(),
               enc);
  nlohmann::json cmeta;
  cmeta["kind"] = "classifier";
  cmeta["n_classes"] = map.size();
  ad::save_checkpoint((fs::path(cli.out_dir) / "classifier.sfck").string(), cls.set, cmeta);
  train::write_curve_csv((fs::path(cli.out_dir) / "finetune_curve.csv").string(), fit.curve);

  std::vector<int> truth;
  for (auto i : plan.test) truth.push_back(ids[i]);
  const auto report =
      eval::make_report(eval::make_confusion(truth, predictions, map.size()), cfg.train.seed, hash);
  std::ofstream rf(fs::path(cli.out_dir) / "finetune_report.json");
  rf << eval::to_json(report).dump(2) << "\n";
  std::printf("finetune[%s]: test accuracy %.4f macro-F1 %.4f (config %s)\n", mode.c_str(),
              report.accuracy, report.macro_f1, hash.c_str());
  return 0;
}

int cmd_train_router(const Cli& cli, RunConfig cfg) {
  const auto hash = write_resolved_config(cli, cfg, "train-router");
  const auto ds = load_dataset_or_throw(cfg);
  const auto map = eval::build_class_map(ds.records, eval::Task::kMultiprotocol);
  const auto ids = eval::class_ids(ds.records, eval::Task::kMultiprotocol, map);

  eval::SplitPlan plan;
  plan.n_train_per_class = cfg.eval.n_per_class;
  plan.n_val_per_class = std::max<std::size_t>(4, cfg.eval.n_per_class / 4);
  plan.n_test_per_class = cfg.eval.n_test_per_class;
  plan.seed = cfg.train.seed;
  plan = eval::stratified_split(ids, plan, map.names);

  auto router = moe::make_router<float>(cfg.encoder.patch, mix_seed(cfg.train.seed, 0x6),
                                        cfg.encoder.max_seq);
  std::vector<train::LabeledSample> labeled(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) labeled[i] = {&ds.records[i], ids[i]};
  const auto result = moe::train_router(router, labeled, plan.train, plan.val, cfg.train);
  if (!result.balanced)
    std::fprintf(stderr, "warning: UnbalancedDataset - protocol counts differ in train split\n");

  nlohmann::json rmeta;
  rmeta["kind"] = "router";
  rmeta["patch"] = cfg.encoder.patch;
  rmeta["max_seq"] = cfg.encoder.max_seq;
  const auto router_path = (fs::path(cli.out_dir) / "router.sfck").string();
  ad::save_checkpoint(router_path, router.backbone.set, rmeta);
  train::write_curve_csv((fs::path(cli.out_dir) / "router_curve.csv").string(),
                         result.fit.curve);

  std::vector<int> truth, pred;
  for (auto i : plan.test) {
    truth.push_back(ids[i]);
    pred.push_back(moe::route(ds.records[i], router).chosen);
  }
  const auto report =
      eval::make_report(eval::make_confusion(truth, pred, map.size()), cfg.train.seed, hash);
  std::ofstream rf(fs::path(cli.out_dir) / "router_report.json");
  rf << eval::to_json(report).dump(2) << "\n";

  if (cfg.paths.expert_ckpts.size() == moe::kNumExperts) {
    std::ofstream bf(fs::path(cli.out_dir) / "moe_bundle.json");
    bf << moe::bundle_manifest(router_path, cfg.paths.expert_ckpts, moe::AggregationMode::kTop1)
              .dump(2)
       << "\n";
  }
  std::printf("train-router: selection accuracy %.4f macro-F1 %.4f (config %s)\n",
              report.accuracy, report.macro_f1, hash.c_str());
  return 0;
}

int cmd_eval(const Cli& cli, RunConfig cfg) {
  const auto hash = write_resolved_config(cli, cfg, "eval");
  const auto ds = load_dataset_or_throw(cfg);
  const auto task = eval::task_from_string(cfg.eval.task);

  eval::TaskSummary summary;
  if (task == eval::Task::kMultiprotocol) {
    summary = eval::run_router_task<float>(ds.records, cfg.encoder.patch, cfg.eval.n_per_class,
                                           cfg.eval.repeats, cfg.train.seed, cfg.train, hash);
  } else {
    if (cfg.paths.encoder_ckpt.empty()) throw ConfigError("paths.encoder_ckpt is required");
    auto enc = load_encoder(cfg.paths.encoder_ckpt);
    auto dec = cfg.paths.decoder_ckpt.empty()
                   ? encoder::make_decoder<float>(enc.cfg.dim, enc.cfg.ffn_dim(),
                                                  decoder_out_dim(enc.cfg), 0)
                   : load_decoder(cfg.paths.decoder_ckpt);
    const auto mode =
        cfg.eval.mode == "ft" ? train::FinetuneMode::kFt : train::FinetuneMode::kFrozen;
    summary = eval::run_task(task, enc, dec, ds.records, mode, cfg.eval.n_per_class,
                             cfg.eval.repeats, cfg.train.seed, cfg.train, hash);
  }
  std::ofstream rf(fs::path(cli.out_dir) / "eval_report.json");
  rf << eval::to_json(summary).dump(2) << "\n";
  std::printf("eval[%s]: macro-F1 %.4f +- %.4f, accuracy %.4f +- %.4f over %d repeats (config %s)\n",
              cfg.eval.task.c_str(), summary.mean_macro_f1, summary.std_macro_f1,
              summary.mean_accuracy, summary.std_accuracy, cfg.eval.repeats, hash.c_str());
  return 0;
}

int cmd_export(const Cli& cli, RunConfig cfg) {
  write_resolved_config(cli, cfg, "export-embeddings");
  const auto ds = load_dataset_or_throw(cfg);
  if (cfg.paths.encoder_ckpt.empty()) throw ConfigError("paths.encoder_ckpt is required");
  auto enc = load_encoder(cfg.paths.encoder_ckpt);
  const auto path = (fs::path(cli.out_dir) / "embeddings.tsv").string();
  eval::export_embeddings(enc, ds.records, path, cfg.train.workers);
  std::printf("export-embeddings: %zu rows, width %d -> %s\n", ds.records.size(), enc.cfg.dim,
              path.c_str());
  return 0;
}

int cmd_render(const Cli& cli, const std::string& shard_path, std::size_t index) {
  fs::create_directories(cli.out_dir);
  const auto records = specgen::read_shard(shard_path);
  if (index >= records.size()) throw IndexError("record index out of range");
  const auto out = (fs::path(cli.out_dir) / ("spectrogram_" + std::to_string(index) + ".pgm"))
                       .string();
  eval::render_pgm(records[index], out);
  std::printf("render: %zux%zu -> %s\n", records[index].t, records[index].k, out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specforge: protocol-diverse spectrogram datasets and transformer experts"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "run configuration JSON");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override master/train seed");
  app.add_option("--out", cli.out_dir, "output directory");

  auto* generate = app.add_subcommand("generate", "synthesize a labeled spectrogram dataset");
  auto* pretrain = app.add_subcommand("pretrain", "masked-spectrogram pretraining");
  auto* finetune = app.add_subcommand("finetune", "supervised fine-tuning on a few-shot split");
  std::string ft_mode = "frozen";
  finetune->add_option("--mode", ft_mode, "frozen | ft");
  auto* train_router = app.add_subcommand("train-router", "train the expert-selection router");
  auto* eval_cmd = app.add_subcommand("eval", "few-shot evaluation with repeats");
  std::string task_flag;
  std::size_t npc_flag = 0;
  int repeats_flag = 0;
  eval_cmd->add_option("--task", task_flag, "modulation | snr-doppler | multiprotocol");
  eval_cmd->add_option("--n-per-class", npc_flag, "train samples per class");
  eval_cmd->add_option("--repeats", repeats_flag, "number of seeded repeats");
  auto* export_cmd = app.add_subcommand("export-embeddings", "write pooled embeddings as TSV");
  auto* render = app.add_subcommand("render", "render one shard record as binary PGM");
  std::string shard_path;
  std::size_t render_index = 0;
  render->add_option("--input", shard_path, "SGS1 shard file")->required();
  render->add_option("--index", render_index, "record index");

  // global flags are accepted after the subcommand as well
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (seed_opt->count() > 0) cli.seed = seed_value;
    if (render->parsed()) return cmd_render(cli, shard_path, render_index);

    RunConfig cfg = load_config(cli);
    if (eval_cmd->parsed()) {
      if (!task_flag.empty()) cfg.eval.task = task_flag;
      if (npc_flag > 0) cfg.eval.n_per_class = npc_flag;
      if (repeats_flag > 0) cfg.eval.repeats = repeats_flag;
    }
    if (generate->parsed()) return cmd_generate(cli, cfg);
    if (pretrain->parsed()) return cmd_pretrain(cli, cfg);
    if (finetune->parsed()) return cmd_finetune(cli, cfg, ft_mode);
    if (train_router->parsed()) return cmd_train_router(cli, cfg);
    if (eval_cmd->parsed()) return cmd_eval(cli, cfg);
    if (export_cmd->parsed()) return cmd_export(cli, cfg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
