// skipclip: data generation, pretraining, evaluation and diagnostics.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "skipclip/config.hpp"
#include "skipclip/errors.hpp"
#include "skipclip/evaluation/heatmap.hpp"
#include "skipclip/numerics/skt.hpp"
#include "skipclip/objectives/objective_check.hpp"
#include "skipclip/pipeline.hpp"
#include "skipclip/rng.hpp"
#include "skipclip/sampling/sampler.hpp"
#include "skipclip/videoio/video.hpp"

namespace fs = std::filesystem;
using namespace skipclip;

namespace {

struct Globals {
  std::size_t threads = 1;
  bool deterministic = false;
  std::optional<std::uint64_t> seed;
};

RunConfig load_config(const std::string& path, const Globals& g) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  if (g.seed) cfg.run.seed = *g.seed;
  cfg.run.threads = g.threads;
  cfg.run.deterministic = cfg.run.deterministic || g.deterministic;
  return cfg;
}

void apply_globals(RunConfig& cfg, const Globals& g) {
  if (g.seed) cfg.run.seed = *g.seed;
  cfg.run.threads = g.threads;
  cfg.run.deterministic = g.deterministic;
}

void emit(const std::string& json_line, const std::string& out_dir, const std::string& file) {
  std::cout << json_line << std::endl;
  if (!out_dir.empty()) pipeline::write_text(fs::path(out_dir) / file, json_line + "\n");
}

int fail(int code, const char* kind, const std::string& message) {
  nlohmann::json err{{"error", kind}, {"message", message}};
  std::cerr << err.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-supervised video representation learning on a synthetic sprite corpus"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", g.deterministic, "single-threaded numerics");
  app.add_option("--seed", g.seed, "run seed (overrides run.seed; data.seed for gen-data)");

  std::string config_path, data_dir, out_dir, ckpt, video_path, mode = "probe", resume;
  std::size_t n_examples = 500, frame = 0;
  bool no_rank = false, no_contrastive = false, no_rotation = false, random_init = false, with_scores = false;

  auto* gen = app.add_subcommand("gen-data", "write the synthetic corpus and manifests");
  gen->add_option("--config", config_path);
  gen->add_option("--out", out_dir)->required();

  auto* pre = app.add_subcommand("pretrain", "train the encoders on the pretext objective");
  pre->add_option("--config", config_path);
  pre->add_option("--data", data_dir)->required();
  pre->add_option("--out", out_dir)->required();
  pre->add_option("--resume", resume, "checkpoint directory to continue from");
  pre->add_flag("--no-rank", no_rank);
  pre->add_flag("--no-contrastive", no_contrastive);
  pre->add_flag("--no-rotation", no_rotation);

  auto* rank = app.add_subcommand("eval-rank", "held-out pairwise ranking accuracy and Kendall tau");
  rank->add_option("--ckpt", ckpt)->required();
  rank->add_option("--data", data_dir)->required();
  rank->add_option("--n", n_examples);
  rank->add_option("--out", out_dir);
  rank->add_flag("--scores", with_scores, "include per-example scores");

  auto* ft = app.add_subcommand("finetune", "linear probe or full fine-tune on motion classes");
  auto* ft_ckpt = ft->add_option("--ckpt", ckpt);
  auto* ft_rand = ft->add_flag("--random-init", random_init);
  ft_ckpt->excludes(ft_rand);
  ft->add_option("--config", config_path, "config for --random-init");
  ft->add_option("--mode", mode)->check(CLI::IsMember({"probe", "full"}));
  ft->add_option("--data", data_dir)->required();
  ft->add_option("--out", out_dir);

  auto* heat = app.add_subcommand("heatmap", "per-cell similarity between a context and a target frame");
  heat->add_option("--ckpt", ckpt)->required();
  heat->add_option("--video", video_path)->required();
  heat->add_option("--frame", frame)->required();
  heat->add_option("--out", out_dir)->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the full objective");
  grad->add_option("--config", config_path);
  std::size_t instances = 20;
  grad->add_option("--instances", instances);

  auto* dump = app.add_subcommand("dump-examples", "write sampled training examples as SKT1 bundles");
  dump->add_option("--config", config_path);
  dump->add_option("--data", data_dir)->required();
  dump->add_option("--out", out_dir)->required();
  dump->add_option("--n", n_examples);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "config", e.what());
  }

  try {
    if (gen->parsed()) {
      RunConfig cfg = load_config(config_path, g);
      if (g.seed) cfg.data.synthetic.seed = *g.seed;
      const auto corpus = pipeline::gen_data(cfg, out_dir);
      nlohmann::json r{{"train_videos", corpus.train.entries.size()}, {"test_videos", corpus.test.entries.size()},
                       {"seed", cfg.data.synthetic.seed}};
      std::cout << r.dump() << std::endl;
    } else if (pre->parsed()) {
      RunConfig cfg = load_config(config_path, g);
      if (no_rank) cfg.loss.enable_rank = false;
      if (no_contrastive) cfg.loss.enable_contrastive = false;
      if (no_rotation) cfg.loss.enable_rotation = false;
      cfg.run.out_dir = out_dir;
      const auto outcome = pipeline::run_pretrain(cfg, data_dir, out_dir,
                                                  resume.empty() ? std::nullopt : std::optional<fs::path>(resume));
      nlohmann::json r{{"epochs", outcome.checkpoint.epoch}, {"steps", outcome.metrics.size()},
                       {"seconds", outcome.seconds}, {"checkpoint", (fs::path(out_dir) / "checkpoint").string()}};
      std::cout << r.dump() << std::endl;
    } else if (rank->parsed()) {
      auto run = pipeline::load_run_checkpoint(ckpt);
      apply_globals(run.config, g);
      if (!out_dir.empty()) pipeline::write_effective_config(run.config, out_dir);
      const auto report = pipeline::run_eval_rank(run.config, run.checkpoint.params, data_dir, n_examples);
      emit(pipeline::ranking_report_json(report, with_scores), out_dir, "ranking_report.json");
    } else if (ft->parsed()) {
      if (ckpt.empty() && !random_init) throw ConfigError("finetune needs --ckpt or --random-init");
      RunConfig cfg;
      numerics::ParamSet<float> params;
      if (random_init) {
        cfg = load_config(config_path, g);
        params = pipeline::random_init_params(cfg);
      } else {
        auto run = pipeline::load_run_checkpoint(ckpt);
        cfg = std::move(run.config);
        apply_globals(cfg, g);
        params = std::move(run.checkpoint.params);
      }
      cfg.run.finetune_mode = mode;
      validate(cfg);
      if (!out_dir.empty()) pipeline::write_effective_config(cfg, out_dir);
      const auto result = pipeline::run_finetune(cfg, params, data_dir);
      emit(evaluation::report_json(result.report), out_dir, "probe_report.json");
    } else if (heat->parsed()) {
      auto run = pipeline::load_run_checkpoint(ckpt);
      const RunConfig& cfg = run.config;
      const auto setup = pretrain_setup(cfg);
      const videoio::Video video = videoio::load_video(video_path);
      const std::size_t K = cfg.sample.context_frames, r = cfg.sample.target_rate;
      if (frame >= video.num_frames() || frame + 1 < K + r)
        throw ConfigError("heatmap: frame " + std::to_string(frame) + " needs " + std::to_string(K + r - 1) +
                          " earlier frames and must be < " + std::to_string(video.num_frames()));
      const std::size_t context_end = frame - r + 1;
      sampling::AugmentationSpec center = cfg.augment;
      center.random_crop = false;
      center.hflip_prob = 0.0;
      Rng rng(0);
      const auto rec = sampling::draw_augmentation(video.height(), video.width(), center, rng);
      const numerics::Tensor context = sampling::apply_augmentation(video.clip(context_end - K, context_end), rec);
      const numerics::Tensor target = sampling::apply_augmentation(video.clip(frame, frame + 1), rec);
      const encoders::ParamEncoder enc(run.checkpoint.params, setup.encoder);
      const numerics::Tensor grid = evaluation::heatmap_grid(enc.encode_context(context), enc.encode_target(target));
      pipeline::write_effective_config(cfg, out_dir);
      const auto files = evaluation::export_heatmap(grid, rec.crop_height, rec.crop_width, out_dir);
      evaluation::write_frame_pgm(target.slice0(0, 1).reshaped({target.dim(1), target.dim(2), target.dim(3)}),
                                  fs::path(out_dir) / "frame.pgm");
      double score = 0.0;
      for (float v : grid.data()) score += v;
      score /= static_cast<double>(grid.size());
      nlohmann::json r_json{{"score", score},
                            {"grid", {grid.dim(0), grid.dim(1)}},
                            {"context", {context_end - K, context_end}},
                            {"frame", frame},
                            {"image", files.image.string()},
                            {"grid_file", files.grid.string()}};
      std::cout << r_json.dump() << std::endl;
    } else if (grad->parsed()) {
      const RunConfig cfg = load_config(config_path, g);
      objectives::TinyProblem problem = objectives::tiny_problem();
      problem.loss = cfg.loss;
      problem.augment.rotation_enabled = cfg.loss.enable_rotation;
      objectives::ObjectiveCheckConfig check;
      check.instances = instances;
      check.seed = cfg.run.seed;
      const auto report = objectives::check_objective_gradients(problem, check);
      std::cout << objectives::report_json(report) << std::endl;
      if (!report.passed())
        return fail(4, "numerical", "gradient check failed: max relative error " + std::to_string(report.max_rel_error));
    } else if (dump->parsed()) {
      RunConfig cfg = load_config(config_path, g);
      validate(cfg);
      pipeline::write_effective_config(cfg, out_dir);
      const videoio::Dataset train = videoio::load_dataset(pipeline::train_manifest(data_dir));
      for (std::size_t i = 0; i < n_examples; ++i) {
        Rng rng = Rng::derive(cfg.run.seed, "dump", i);
        const auto ex = sampling::make_example(train.videos, rng.uniform_index(train.size()), cfg.sample,
                                               cfg.augment, rng);
        const fs::path dir = fs::path(out_dir) / ("example_" + std::to_string(i));
        fs::create_directories(dir);
        numerics::save_skt(dir / "context.skt", ex.context);
        numerics::save_skt(dir / "targets.skt", numerics::stack(std::span<const numerics::Tensor>(ex.targets)));
        if (!ex.negatives.empty())
          numerics::save_skt(dir / "negatives.skt", numerics::stack(std::span<const numerics::Tensor>(ex.negatives)));
        if (!ex.rotation_inputs.empty())
          numerics::save_skt(dir / "rotations.skt",
                             numerics::stack(std::span<const numerics::Tensor>(ex.rotation_inputs)));
        nlohmann::json negs = nlohmann::json::array();
        for (const auto& s : ex.negative_sources) negs.push_back({{"video", s.video_id}, {"frame", s.frame}});
        nlohmann::json meta{{"video", ex.video_id},
                            {"seek", ex.seek},
                            {"target_starts", ex.target_starts},
                            {"rotation_labels", ex.rotation_labels},
                            {"negatives", negs},
                            {"reversed", ex.augmentation.reversed},
                            {"flipped", ex.augmentation.flipped},
                            {"crop", {ex.augmentation.crop_y, ex.augmentation.crop_x, ex.augmentation.crop_height,
                                      ex.augmentation.crop_width}}};
        pipeline::write_text(dir / "meta.json", meta.dump(2) + "\n");
      }
      std::cout << nlohmann::json{{"examples", n_examples}, {"out", out_dir}}.dump() << std::endl;
    }
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::kConfig: return fail(2, "config", e.what());
      case ErrorKind::kData: return fail(3, "data", e.what());
      case ErrorKind::kNumerical: return fail(4, "numerical", e.what());
    }
  } catch (const fs::filesystem_error& e) {
    return fail(3, "data", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
  return 0;
}
