#include "skipclip/config.hpp"

#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

#include "skipclip/errors.hpp"

namespace skipclip {

using nlohmann::json;

namespace {

// Walks one JSON object, assigning known keys and rejecting the rest.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, _] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("config: unknown field '" + path_ + "." + key + "'");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<V>();
    } catch (const json::exception&) {
      throw ConfigError("config: field '" + path_ + "." + key + "' has the wrong type");
    }
  }
  void get_size(const char* key, std::size_t& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    if (!obj_.at(key).is_number_unsigned())
      throw ConfigError("config: field '" + path_ + "." + key + "' must be a non-negative integer");
    out = obj_.at(key).get<std::size_t>();
  }
  bool has(const char* key) {
    seen_.insert(key);
    return obj_.contains(key);
  }
  const json& at(const char* key) const { return obj_.at(key); }
  std::string path(const char* key) const { return path_ + "." + key; }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_schedule(const json& j, const std::string& path, training::Schedule& s) {
  Section sec(j, path);
  sec.get("base_lr", s.base_lr);
  sec.get("decay_factor", s.decay_factor);
  sec.get_size("decay_every", s.decay_every);
  if (sec.has("decay_until")) {
    const json& v = sec.at("decay_until");
    if (v.is_null())
      s.decay_until.reset();
    else if (v.is_number_unsigned())
      s.decay_until = v.get<std::size_t>();
    else
      throw ConfigError("config: field '" + sec.path("decay_until") + "' must be a non-negative integer or null");
  }
  sec.get("weight_decay", s.weight_decay);
}

json schedule_json(const training::Schedule& s) {
  return json{{"base_lr", s.base_lr},
              {"decay_factor", s.decay_factor},
              {"decay_every", s.decay_every},
              {"decay_until", s.decay_until ? json(*s.decay_until) : json(nullptr)},
              {"weight_decay", s.weight_decay}};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(doc, "config");
  if (top.has("data")) {
    Section s(top.at("data"), "data");
    auto& syn = cfg.data.synthetic;
    s.get_size("num_videos", syn.num_videos);
    s.get_size("test_videos", cfg.data.test_videos);
    s.get_size("frames_per_video", syn.frames_per_video);
    s.get_size("height", syn.height);
    s.get_size("width", syn.width);
    s.get_size("channels", syn.channels);
    s.get_size("num_motion_classes", syn.num_motion_classes);
    s.get_size("num_speed_buckets", syn.num_speed_buckets);
    s.get("sprite_size", syn.sprite_size);
    s.get("speed_min", syn.speed_min);
    s.get("speed_max", syn.speed_max);
    s.get_size("safe_margin", syn.safe_margin);
    s.get("seed", syn.seed);
  }
  if (top.has("sample")) {
    Section s(top.at("sample"), "sample");
    s.get_size("K", cfg.sample.context_frames);
    s.get_size("M", cfg.sample.num_targets);
    s.get_size("r", cfg.sample.target_rate);
    s.get_size("d", cfg.sample.target_length);
    s.get_size("num_negatives", cfg.sample.num_negatives);
  }
  if (top.has("augment")) {
    Section s(top.at("augment"), "augment");
    s.get("reverse_prob", cfg.augment.reverse_prob);
    s.get("hflip_prob", cfg.augment.hflip_prob);
    s.get_size("crop_height", cfg.augment.crop_height);
    s.get_size("crop_width", cfg.augment.crop_width);
    s.get("random_crop", cfg.augment.random_crop);
    s.get("rotation_enabled", cfg.augment.rotation_enabled);
  }
  if (top.has("encoder")) {
    Section s(top.at("encoder"), "encoder");
    auto& e = cfg.encoder;
    s.get_size("input_channels", e.input_channels);
    s.get_size("kernel", e.kernel);
    s.get("final_relu", e.final_relu);
    if (s.has("context_blocks")) {
      e.context_blocks.clear();
      const json& blocks = s.at("context_blocks");
      if (!blocks.is_array()) throw ConfigError("config: 'encoder.context_blocks' must be an array");
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        Section b(blocks[i], "encoder.context_blocks[" + std::to_string(i) + "]");
        encoders::ContextBlock block;
        b.get_size("channels", block.channels);
        b.get_size("temporal_stride", block.temporal_stride);
        b.get_size("spatial_stride", block.spatial_stride);
        e.context_blocks.push_back(block);
      }
    }
    if (s.has("target_blocks")) {
      e.target_blocks.clear();
      const json& blocks = s.at("target_blocks");
      if (!blocks.is_array()) throw ConfigError("config: 'encoder.target_blocks' must be an array");
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        Section b(blocks[i], "encoder.target_blocks[" + std::to_string(i) + "]");
        encoders::TargetBlock block;
        b.get_size("channels", block.channels);
        b.get_size("spatial_stride", block.spatial_stride);
        e.target_blocks.push_back(block);
      }
    }
  }
  if (top.has("loss")) {
    Section s(top.at("loss"), "loss");
    s.get("delta_rank", cfg.loss.delta_rank);
    s.get("delta_neg", cfg.loss.delta_neg);
    s.get("enable_rank", cfg.loss.enable_rank);
    s.get("enable_contrastive", cfg.loss.enable_contrastive);
    s.get("enable_rotation", cfg.loss.enable_rotation);
  }
  if (top.has("optim")) {
    Section s(top.at("optim"), "optim");
    s.get_size("epochs", cfg.optim.epochs);
    s.get_size("batch_size", cfg.optim.batch_size);
    if (s.has("pretrain_schedule")) read_schedule(s.at("pretrain_schedule"), "optim.pretrain_schedule", cfg.optim.pretrain_schedule);
    s.get("beta1", cfg.optim.adam.beta1);
    s.get("beta2", cfg.optim.adam.beta2);
    s.get("epsilon", cfg.optim.adam.epsilon);
    if (s.has("weight_decay_mode")) {
      std::string mode;
      s.get("weight_decay_mode", mode);
      if (mode == "decoupled")
        cfg.optim.adam.weight_decay_mode = training::WeightDecayMode::kDecoupled;
      else if (mode == "coupled")
        cfg.optim.adam.weight_decay_mode = training::WeightDecayMode::kCoupled;
      else
        throw ConfigError("config: 'optim.weight_decay_mode' must be \"decoupled\" or \"coupled\"");
    }
    s.get_size("finetune_epochs", cfg.optim.finetune_epochs);
    s.get_size("finetune_batch_size", cfg.optim.finetune_batch_size);
    if (s.has("finetune_schedule")) read_schedule(s.at("finetune_schedule"), "optim.finetune_schedule", cfg.optim.finetune_schedule);
  }
  if (top.has("run")) {
    Section s(top.at("run"), "run");
    s.get("name", cfg.run.name);
    s.get("seed", cfg.run.seed);
    s.get("deterministic", cfg.run.deterministic);
    s.get("out_dir", cfg.run.out_dir);
    s.get_size("threads", cfg.run.threads);
    s.get_size("checkpoint_every", cfg.run.checkpoint_every);
    s.get_size("eval_examples", cfg.run.eval_examples);
    s.get("finetune_mode", cfg.run.finetune_mode);
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  return parse_run_config(std::string(std::istreambuf_iterator<char>(in), {}));
}

std::string run_config_to_json(const RunConfig& cfg) {
  const auto& syn = cfg.data.synthetic;
  json context_blocks = json::array(), target_blocks = json::array();
  for (const auto& b : cfg.encoder.context_blocks)
    context_blocks.push_back({{"channels", b.channels}, {"temporal_stride", b.temporal_stride}, {"spatial_stride", b.spatial_stride}});
  for (const auto& b : cfg.encoder.target_blocks)
    target_blocks.push_back({{"channels", b.channels}, {"spatial_stride", b.spatial_stride}});
  json doc{
      {"data",
       {{"num_videos", syn.num_videos}, {"test_videos", cfg.data.test_videos}, {"frames_per_video", syn.frames_per_video},
        {"height", syn.height}, {"width", syn.width}, {"channels", syn.channels},
        {"num_motion_classes", syn.num_motion_classes}, {"num_speed_buckets", syn.num_speed_buckets},
        {"sprite_size", syn.sprite_size}, {"speed_min", syn.speed_min}, {"speed_max", syn.speed_max},
        {"safe_margin", syn.safe_margin}, {"seed", syn.seed}}},
      {"sample",
       {{"K", cfg.sample.context_frames}, {"M", cfg.sample.num_targets}, {"r", cfg.sample.target_rate},
        {"d", cfg.sample.target_length}, {"num_negatives", cfg.sample.num_negatives}}},
      {"augment",
       {{"reverse_prob", cfg.augment.reverse_prob}, {"hflip_prob", cfg.augment.hflip_prob},
        {"crop_height", cfg.augment.crop_height}, {"crop_width", cfg.augment.crop_width},
        {"random_crop", cfg.augment.random_crop}, {"rotation_enabled", cfg.augment.rotation_enabled}}},
      {"encoder",
       {{"input_channels", cfg.encoder.input_channels}, {"kernel", cfg.encoder.kernel},
        {"final_relu", cfg.encoder.final_relu}, {"context_blocks", context_blocks}, {"target_blocks", target_blocks}}},
      {"loss",
       {{"delta_rank", cfg.loss.delta_rank}, {"delta_neg", cfg.loss.delta_neg}, {"enable_rank", cfg.loss.enable_rank},
        {"enable_contrastive", cfg.loss.enable_contrastive}, {"enable_rotation", cfg.loss.enable_rotation}}},
      {"optim",
       {{"epochs", cfg.optim.epochs}, {"batch_size", cfg.optim.batch_size},
        {"pretrain_schedule", schedule_json(cfg.optim.pretrain_schedule)}, {"beta1", cfg.optim.adam.beta1},
        {"beta2", cfg.optim.adam.beta2}, {"epsilon", cfg.optim.adam.epsilon},
        {"weight_decay_mode",
         cfg.optim.adam.weight_decay_mode == training::WeightDecayMode::kDecoupled ? "decoupled" : "coupled"},
        {"finetune_epochs", cfg.optim.finetune_epochs}, {"finetune_batch_size", cfg.optim.finetune_batch_size},
        {"finetune_schedule", schedule_json(cfg.optim.finetune_schedule)}}},
      {"run",
       {{"name", cfg.run.name}, {"seed", cfg.run.seed}, {"deterministic", cfg.run.deterministic}, {"out_dir", cfg.run.out_dir},
        {"threads", cfg.run.threads}, {"checkpoint_every", cfg.run.checkpoint_every},
        {"eval_examples", cfg.run.eval_examples}, {"finetune_mode", cfg.run.finetune_mode}}}};
  return doc.dump(2) + "\n";
}

videoio::SyntheticSpec synthetic_spec(const RunConfig& cfg) {
  videoio::SyntheticSpec s = cfg.data.synthetic;
  s.min_frames = cfg.sample.min_frames();
  return s;
}

void validate(const RunConfig& cfg) {
  sampling::validate(cfg.sample);
  objectives::validate(cfg.loss);
  training::validate(cfg.optim.pretrain_schedule);
  training::validate(cfg.optim.finetune_schedule);
  videoio::validate(synthetic_spec(cfg));
  const auto& syn = cfg.data.synthetic;
  if (cfg.augment.crop_height > syn.height || cfg.augment.crop_width > syn.width)
    throw ConfigError("config: crop " + std::to_string(cfg.augment.crop_height) + "x" +
                      std::to_string(cfg.augment.crop_width) + " exceeds frame " + std::to_string(syn.height) + "x" +
                      std::to_string(syn.width));
  if (cfg.augment.rotation_enabled && cfg.augment.crop_height != cfg.augment.crop_width)
    throw ConfigError("config: rotation needs a square crop");
  if (cfg.loss.enable_rotation && !cfg.augment.rotation_enabled)
    throw ConfigError("config: loss.enable_rotation requires augment.rotation_enabled");
  if (cfg.sample.target_length != 1) throw ConfigError("config: the target encoder requires d = 1");
  if (cfg.optim.batch_size == 0 || cfg.optim.finetune_batch_size == 0)
    throw ConfigError("config: batch sizes must be >= 1");
  evaluation::parse_finetune_mode(cfg.run.finetune_mode);
  encoders::validate(pretrain_setup(cfg).encoder);
}

training::PretrainSetup pretrain_setup(const RunConfig& cfg) {
  training::PretrainSetup s;
  s.sample = cfg.sample;
  s.augment = cfg.augment;
  s.encoder = cfg.encoder;
  s.encoder.frame_height = cfg.augment.crop_height;
  s.encoder.frame_width = cfg.augment.crop_width;
  s.encoder.context_frames = cfg.sample.context_frames;
  s.encoder.input_channels = cfg.data.synthetic.channels;
  s.encoder.num_classes = cfg.data.synthetic.num_motion_classes;
  s.loss = cfg.loss;
  s.run.epochs = cfg.optim.epochs;
  s.run.batch_size = cfg.optim.batch_size;
  s.run.seed = cfg.run.seed;
  s.run.threads = cfg.effective_threads();
  s.run.checkpoint_every = cfg.run.checkpoint_every;
  s.run.schedule = cfg.optim.pretrain_schedule;
  s.run.adam = cfg.optim.adam;
  s.config_json = run_config_to_json(cfg);
  return s;
}

evaluation::FinetuneConfig finetune_config(const RunConfig& cfg) {
  evaluation::FinetuneConfig f;
  f.mode = evaluation::parse_finetune_mode(cfg.run.finetune_mode);
  f.schedule = cfg.optim.finetune_schedule;
  f.adam = cfg.optim.adam;
  f.epochs = cfg.optim.finetune_epochs;
  f.batch_size = cfg.optim.finetune_batch_size;
  f.window = cfg.sample.context_frames;
  f.seed = cfg.run.seed;
  f.threads = cfg.effective_threads();
  return f;
}

}  // namespace skipclip
