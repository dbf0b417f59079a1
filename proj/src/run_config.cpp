#include "anydoor/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace anydoor {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(trim(item));
    T v{};
    std::string rest;
    if (!(is >> v) || (is >> rest)) {
      throw InvalidArgument("config '" + key + "': bad list element '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("config '" + key + "': empty list");
  return out;
}

}  // namespace

const std::vector<ConfigKey>& RunConfig::keys() {
  static const std::vector<ConfigKey> k = {
      {"seed", "", "random seed (required by train, teleport, eval)"},
      {"model_seed", "0", "parameter initialisation seed"},
      {"image_side", "32", "model input side in pixels"},
      {"latent_factor", "2", "latent downsampling factor"},
      {"base_width", "32", "denoiser base channel width"},
      {"channel_mult", "1,2,2", "per-stage channel multipliers"},
      {"token_width", "32", "cross-attention token width"},
      {"attn_dim", "32", "attention projection width"},
      {"time_dim", "16", "timestep embedding width"},
      {"backbone_side", "64", "ID backbone input side"},
      {"backbone_patch", "8", "ID backbone patch size"},
      {"backbone_width", "64", "ID backbone token width"},
      {"backbone_seed", "7", "toy backbone mixing seed"},
      {"prediction", "x", "network target: x or epsilon"},
      {"schedule", "linear", "noise schedule: linear or scaled_linear"},
      {"T", "1000", "diffusion steps"},
      {"sampler_steps", "4", "sampling steps"},
      {"zoom_ratio", "2.0", "box-to-square amplifier"},
      {"erosion_radius", "2", "HF-map mask erosion iterations"},
      {"crop_pad", "0.0", "object crop padding fraction"},
      {"feather", "0", "paste-back feather width (pixels)"},
      {"box_probability", "0.3", "shape simulator box-mode probability"},
      {"downsample_ratios", "0.5,0.25,0.125,0.0625", "shape simulator ratios"},
      {"morph_iters_max", "5", "shape simulator max morphology steps"},
      {"flip_probability", "0.5", "image-pair flip probability"},
      {"max_rotation", "15", "image-pair max rotation (degrees)"},
      {"min_scale", "0.9", "image-pair min scale"},
      {"max_scale", "1.1", "image-pair max scale"},
      {"max_box_pad", "0.1", "per-side random box padding fraction"},
      {"early_boost", "0.5", "timestep sampler boost of the favoured half"},
      {"boundary", "500", "timestep sampler boundary"},
      {"learning_rate", "1e-5", "Adam learning rate"},
      {"batch_size", "1", "training batch size"},
      {"train_steps", "1000", "optimisation steps"},
      {"checkpoint_every", "0", "intermediate checkpoint interval (0 = end only)"},
      {"workers", "1", "data / benchmark worker threads"},
      {"manifest", "", "training manifest (JSON lines)"},
      {"checkpoint", "", "checkpoint to load"},
      {"checkpoint_out", "", "checkpoint to write after training"},
      {"loss_log", "", "CSV loss log path"},
      {"objects", "", "benchmark objects manifest (JSON lines)"},
      {"scenes", "", "benchmark scenes manifest (JSON lines)"},
      {"proposals", "1", "benchmark proposals per combination"},
      {"runs_dir", "runs", "run output root (ANYDOOR_RUNS overrides)"},
      {"run_id", "", "run directory name (default derived from seed)"},
  };
  return k;
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw InvalidArgument("expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      cfg.set(line);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config line " + std::to_string(n) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

bool RunConfig::has(const std::string& key) const {
  auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  const auto& v = get(key);
  try {
    size_t used = 0;
    const int r = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw InvalidArgument("config '" + key + "': expected an integer, got '" + v + "'");
  }
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  try {
    size_t used = 0;
    const double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw InvalidArgument("config '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const auto& v = get(key);
  try {
    size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto r = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw InvalidArgument("config '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

std::uint64_t RunConfig::require_seed(const std::string& command) const {
  if (!has("seed")) throw InvalidArgument(command + " requires a seed (--seed or seed=...)");
  return get_u64("seed");
}

diffusion::ModelConfig RunConfig::model_config() const {
  diffusion::ModelConfig m;
  m.image_side = get_int("image_side");
  m.latent_factor = get_int("latent_factor");
  m.base_width = get_int("base_width");
  m.channel_mult = parse_list<int>("channel_mult", get("channel_mult"));
  m.token_width = get_int("token_width");
  m.attn_dim = get_int("attn_dim");
  m.time_dim = get_int("time_dim");
  m.backbone_side = get_int("backbone_side");
  m.backbone_patch = get_int("backbone_patch");
  m.backbone_width = get_int("backbone_width");
  m.backbone_seed = get_u64("backbone_seed");
  m.prediction = diffusion::parse_prediction(get("prediction"));
  m.init_seed = get_u64("model_seed");
  return m;
}

diffusion::ScheduleKind RunConfig::schedule_kind() const {
  return diffusion::parse_schedule_kind(get("schedule"));
}

int RunConfig::total_steps() const { return get_int("T"); }

inference::TeleportConfig RunConfig::teleport_config() const {
  inference::TeleportConfig t;
  t.zoom_ratio = get_double("zoom_ratio");
  t.erosion_radius = get_int("erosion_radius");
  t.crop_pad = get_double("crop_pad");
  t.sampler_steps = get_int("sampler_steps");
  t.feather = get_int("feather");
  return t;
}

datapipe::PairConfig RunConfig::pair_config() const {
  datapipe::PairConfig p;
  p.crop_pad = get_double("crop_pad");
  p.max_box_pad = get_double("max_box_pad");
  p.shape.box_probability = get_double("box_probability");
  p.shape.downsample_ratios = parse_list<double>("downsample_ratios", get("downsample_ratios"));
  p.shape.morph_iters_max = get_int("morph_iters_max");
  p.augment.flip_probability = get_double("flip_probability");
  p.augment.max_rotation_deg = get_double("max_rotation");
  p.augment.min_scale = get_double("min_scale");
  p.augment.max_scale = get_double("max_scale");
  return p;
}

datapipe::TimestepSamplerConfig RunConfig::timestep_config() const {
  datapipe::TimestepSamplerConfig t;
  t.T = get_int("T");
  t.early_boost = get_double("early_boost");
  t.boundary = get_int("boundary");
  return t;
}

diffusion::ConditioningConfig RunConfig::conditioning_config() const {
  return {get_double("zoom_ratio"), get_int("erosion_radius")};
}

void RunConfig::validate() const {
  model_config().validate();
  schedule_kind();
  if (total_steps() < 2) throw InvalidArgument("config 'T' must be >= 2");
  teleport_config().validate();
  if (get_int("sampler_steps") > total_steps()) {
    throw InvalidArgument("config 'sampler_steps' exceeds 'T'");
  }
  const auto p = pair_config();
  p.shape.validate();
  p.augment.validate();
  if (!(p.max_box_pad >= 0)) throw InvalidArgument("config 'max_box_pad' must be >= 0");
  timestep_config().validate();
  if (!(get_double("learning_rate") > 0)) throw InvalidArgument("config 'learning_rate' must be > 0");
  if (get_int("batch_size") < 1) throw InvalidArgument("config 'batch_size' must be >= 1");
  if (get_int("train_steps") < 0) throw InvalidArgument("config 'train_steps' must be >= 0");
  if (get_int("checkpoint_every") < 0) throw InvalidArgument("config 'checkpoint_every' must be >= 0");
  if (get_int("workers") < 1) throw InvalidArgument("config 'workers' must be >= 1");
  if (get_int("proposals") < 1) throw InvalidArgument("config 'proposals' must be >= 1");
  if (has("seed")) get_u64("seed");
  get_u64("model_seed");
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + get(k.name) + "\n";
  return out;
}

std::filesystem::path runs_directory(const RunConfig& cfg) {
  if (const char* env = std::getenv("ANYDOOR_RUNS"); env && *env) return env;
  return cfg.get("runs_dir");
}

}  // namespace anydoor
