#pragma once

// End-to-end run steps shared by the command line tool and the acceptance
// suite. Every step that owns an output directory writes the effective
// config there first.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "skipclip/config.hpp"
#include "skipclip/evaluation/finetune.hpp"
#include "skipclip/evaluation/ranking.hpp"
#include "skipclip/training/checkpoint.hpp"
#include "skipclip/training/pretrain.hpp"
#include "skipclip/videoio/manifest.hpp"

namespace skipclip::pipeline {

namespace fs = std::filesystem;

void write_effective_config(const RunConfig& cfg, const fs::path& out_dir);
void write_text(const fs::path& path, const std::string& text);

videoio::GeneratedCorpus gen_data(const RunConfig& cfg, const fs::path& out_dir);

fs::path train_manifest(const fs::path& data_dir);
fs::path test_manifest(const fs::path& data_dir);

struct PretrainOutcome {
  training::Checkpoint checkpoint;
  std::vector<training::StepMetrics> metrics;
  double seconds = 0.0;
};

/// Writes config.json, metrics.jsonl, checkpoints/epoch_NNNN (when
/// run.checkpoint_every > 0), the final checkpoint/ and pretrain_report.json.
PretrainOutcome run_pretrain(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                             const std::optional<fs::path>& resume = std::nullopt, bool echo_metrics = false);

struct RunCheckpoint {
  RunConfig config;
  training::Checkpoint checkpoint;
};

/// Loads a checkpoint and the config it was trained with; the stored
/// fingerprint must match that config's architecture.
RunCheckpoint load_run_checkpoint(const fs::path& dir);

numerics::ParamSet<float> random_init_params(const RunConfig& cfg);

std::string ranking_report_json(const evaluation::RankingReport& report, bool include_scores);

evaluation::RankingReport run_eval_rank(const RunConfig& cfg, const numerics::ParamSet<float>& params,
                                        const fs::path& data_dir, std::size_t n_examples);

evaluation::FinetuneResult run_finetune(const RunConfig& cfg, const numerics::ParamSet<float>& params,
                                        const fs::path& data_dir);

}  // namespace skipclip::pipeline
