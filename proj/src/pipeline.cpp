#include "skipclip/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "skipclip/errors.hpp"
#include "skipclip/rng.hpp"

namespace skipclip::pipeline {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("short write to " + path.string());
}

void write_effective_config(const RunConfig& cfg, const fs::path& out_dir) {
  write_text(out_dir / "config.json", run_config_to_json(cfg));
}

videoio::GeneratedCorpus gen_data(const RunConfig& cfg, const fs::path& out_dir) {
  validate(cfg);
  write_effective_config(cfg, out_dir);
  return videoio::generate_synthetic_dataset(synthetic_spec(cfg), cfg.data.test_videos, out_dir);
}

fs::path train_manifest(const fs::path& data_dir) { return data_dir / "train.json"; }
fs::path test_manifest(const fs::path& data_dir) { return data_dir / "test.json"; }

namespace {

std::string epoch_dir(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu", epoch);
  return buf;
}

}  // namespace

PretrainOutcome run_pretrain(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                             const std::optional<fs::path>& resume, bool echo_metrics) {
  validate(cfg);
  write_effective_config(cfg, out_dir);
  const training::PretrainSetup setup = pretrain_setup(cfg);
  const videoio::Dataset train = videoio::load_dataset(train_manifest(data_dir));

  training::Checkpoint start = resume ? training::load_checkpoint(*resume, encoders::architecture_fingerprint(setup.encoder))
                                      : training::initial_checkpoint(setup);
  PretrainOutcome outcome;
  std::ofstream log(out_dir / "metrics.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write " + (out_dir / "metrics.jsonl").string());

  const auto t0 = std::chrono::steady_clock::now();
  outcome.checkpoint = training::pretrain(
      train.videos, setup, std::move(start),
      [&](const training::StepMetrics& m) {
        const std::string line = training::metrics_json(m);
        log << line << '\n';
        if (echo_metrics) std::cout << line << '\n';
        outcome.metrics.push_back(m);
      },
      [&](const training::Checkpoint& c) { training::save_checkpoint(c, out_dir / "checkpoints" / epoch_dir(c.epoch)); });
  outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log.flush();

  training::save_checkpoint(outcome.checkpoint, out_dir / "checkpoint");
  nlohmann::json report{{"epochs", outcome.checkpoint.epoch},
                        {"adam_steps", outcome.checkpoint.adam.step},
                        {"train_videos", train.size()},
                        {"seconds", outcome.seconds}};
  if (!outcome.metrics.empty()) report["final"] = nlohmann::json::parse(training::metrics_json(outcome.metrics.back()));
  write_text(out_dir / "pretrain_report.json", report.dump(2) + "\n");
  return outcome;
}

RunCheckpoint load_run_checkpoint(const fs::path& dir) {
  training::Checkpoint probe = training::load_checkpoint(dir);
  RunConfig cfg = parse_run_config(probe.config_json);
  const std::uint64_t expected = encoders::architecture_fingerprint(pretrain_setup(cfg).encoder);
  if (probe.fingerprint != expected)
    throw ConfigError("checkpoint " + dir.string() + " does not match the architecture in its own config");
  return RunCheckpoint{std::move(cfg), std::move(probe)};
}

numerics::ParamSet<float> random_init_params(const RunConfig& cfg) {
  return training::initial_checkpoint(pretrain_setup(cfg)).params;
}

std::string ranking_report_json(const evaluation::RankingReport& r, bool include_scores) {
  nlohmann::json doc{{"pairwise_accuracy", r.pairwise_accuracy}, {"kendall_tau", r.kendall_tau}, {"examples", r.examples}};
  if (include_scores) doc["scores"] = r.scores;
  return doc.dump();
}

evaluation::RankingReport run_eval_rank(const RunConfig& cfg, const numerics::ParamSet<float>& params,
                                        const fs::path& data_dir, std::size_t n_examples) {
  const training::PretrainSetup setup = pretrain_setup(cfg);
  const videoio::Dataset test = videoio::load_dataset(test_manifest(data_dir));
  const encoders::ParamEncoder encoder(params, setup.encoder);
  return evaluation::evaluate_ranking(encoder, test.videos, cfg.sample, cfg.augment.crop_height,
                                      cfg.augment.crop_width, n_examples, cfg.run.seed, cfg.effective_threads());
}

evaluation::FinetuneResult run_finetune(const RunConfig& cfg, const numerics::ParamSet<float>& params,
                                        const fs::path& data_dir) {
  const training::PretrainSetup setup = pretrain_setup(cfg);
  const videoio::Dataset train = videoio::load_dataset(train_manifest(data_dir));
  const videoio::Dataset test = videoio::load_dataset(test_manifest(data_dir));
  return evaluation::finetune(params, setup.encoder, train.videos, test.videos, finetune_config(cfg));
}

}  // namespace skipclip::pipeline
