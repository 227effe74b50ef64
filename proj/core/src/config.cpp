#include "lmk/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace lmk {

namespace {

int64_t to_int(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    auto r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    throw ConfigError("config key '" + k + "': expected integer, got '" + v + "'");
  }
}

double to_double(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    auto r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (...) {
    throw ConfigError("config key '" + k + "': expected number, got '" + v + "'");
  }
}

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + k + "': expected boolean, got '" + v + "'");
}

std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::map<std::string, int> kPerceptualLayerNames = {
    {"relu1_2", 0}, {"relu2_2", 1}, {"relu3_3", 2}, {"relu4_3", 3}};

std::string perceptual_layers_string(const std::vector<int>& layers) {
  std::string s;
  for (int l : layers) {
    for (const auto& [name, idx] : kPerceptualLayerNames) {
      if (idx == l) {
        if (!s.empty()) s += ",";
        s += name;
      }
    }
  }
  return s;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "model.preset") {
    if (value == "desk") {
      detector = DetectorConfig::desk(detector.K, detector.projected);
      generator = GeneratorConfig::desk(generator.K);
    } else if (value == "reference") {
      detector = DetectorConfig::reference(detector.K, detector.projected);
      generator = GeneratorConfig::reference(generator.K);
    } else {
      throw ConfigError("model.preset must be desk or reference");
    }
  } else if (key == "model.k") {
    detector.K = to_int(key, value);
    generator.K = detector.K;
  } else if (key == "model.stem_channels") detector.stem_channels = to_int(key, value);
  else if (key == "model.trunk_channels") detector.trunk_channels = to_int(key, value);
  else if (key == "model.hg_levels") detector.hg_levels = to_int(key, value);
  else if (key == "model.generator_features") generator.features = to_int(key, value);
  else if (key == "model.generator_blocks") generator.blocks = to_int(key, value);
  else if (key == "training.regime") training.regime = regime_from_string(value);
  else if (key == "training.epochs") training.epochs = to_int(key, value);
  else if (key == "training.iters_per_epoch") training.iters_per_epoch = to_int(key, value);
  else if (key == "training.batch_size") training.batch_size = to_int(key, value);
  else if (key == "training.lr") training.lr = to_double(key, value);
  else if (key == "training.decay_factor") training.decay_factor = to_double(key, value);
  else if (key == "training.decay_every") training.decay_every = to_int(key, value);
  else if (key == "training.beta1") training.beta1 = to_double(key, value);
  else if (key == "training.beta2") training.beta2 = to_double(key, value);
  else if (key == "training.seed") training.seed = static_cast<uint64_t>(to_int(key, value));
  else if (key == "training.pixel_weight") training.pixel_weight = to_double(key, value);
  else if (key == "training.perceptual_weight") training.perceptual_weight = to_double(key, value);
  else if (key == "training.perceptual_layers") {
    training.perceptual_layers.clear();
    for (const auto& name : split_csv(value)) {
      auto it = kPerceptualLayerNames.find(name);
      if (it == kPerceptualLayerNames.end()) {
        throw ConfigError("unknown perceptual layer '" + name + "'");
      }
      training.perceptual_layers.push_back(it->second);
    }
  } else if (key == "training.vgg_weights") training.vgg_weights = value;
  else if (key == "training.workers") training.workers = to_int(key, value);
  else if (key == "training.checkpoint_every") training.checkpoint_every = to_int(key, value);
  else if (key == "aug.scale_lo") aug.scale_lo = to_double(key, value);
  else if (key == "aug.scale_hi") aug.scale_hi = to_double(key, value);
  else if (key == "aug.theta_max_deg") aug.theta_max = to_double(key, value) * M_PI / 180.0;
  else if (key == "aug.translate_frac") aug.translate_max = to_double(key, value) * kImageSize;
  else if (key == "data.root") data_root = value;
  else if (key == "data.mode") {
    if (value != "warp" && value != "temporal") throw ConfigError("data.mode must be warp|temporal");
    data_mode = value;
  } else if (key == "data.window") temporal_window = to_int(key, value);
  else if (key == "data.flip") temporal_flip = to_bool(key, value);
  else if (key == "out.dir") out_dir = value;
  else if (key == "run.deterministic") deterministic = to_bool(key, value);
  else if (key == "eval.trials") eval_trials = to_int(key, value);
  else if (key == "eval.normalization") {
    if (value != "nme" && value != "mse") throw ConfigError("eval.normalization must be nme|mse");
    eval_normalization = value;
  } else if (key == "eval.mode") {
    if (value != "softargmax" && value != "argmax") throw ConfigError("eval.mode must be softargmax|argmax");
    eval_mode = value;
  } else if (key == "eval.n_im") eval_n_im = split_csv(value);
  else if (key == "eval.anchor_a") anchor_a = to_int(key, value);
  else if (key == "eval.anchor_b") anchor_b = to_int(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  training.validate();
  if (detector.K < 1 || detector.K != generator.K) {
    throw ConfigError("model.k must be >= 1 and shared by detector and generator");
  }
  if (detector.stem_channels < 1 || detector.trunk_channels < 1 || detector.hg_levels < 1) {
    throw ConfigError("model channel/level counts must be positive");
  }
  if (detector.hg_levels > 5) throw ConfigError("model.hg_levels > 5 would underflow the 32x32 grid");
  if (generator.features < 4 || generator.blocks < 1) {
    throw ConfigError("generator features/blocks too small");
  }
  if (aug.scale_lo <= 0 || aug.scale_lo > aug.scale_hi) throw ConfigError("bad aug scale range");
  if (aug.theta_max < 0 || aug.translate_max < 0) throw ConfigError("bad aug ranges");
  if (eval_trials < 1) throw ConfigError("eval.trials must be >= 1");
  if (anchor_a == anchor_b || anchor_a < 0 || anchor_b < 0) {
    throw ConfigError("eval anchors must be two distinct annotation indices");
  }
}

std::string RunConfig::canonical_string() const {
  std::map<std::string, std::string> kv;
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
  };
  kv["model.k"] = std::to_string(detector.K);
  kv["model.stem_channels"] = std::to_string(detector.stem_channels);
  kv["model.trunk_channels"] = std::to_string(detector.trunk_channels);
  kv["model.hg_levels"] = std::to_string(detector.hg_levels);
  kv["model.generator_features"] = std::to_string(generator.features);
  kv["model.generator_blocks"] = std::to_string(generator.blocks);
  kv["training.regime"] = to_string(training.regime);
  kv["training.epochs"] = std::to_string(training.epochs);
  kv["training.iters_per_epoch"] = std::to_string(training.iters_per_epoch);
  kv["training.batch_size"] = std::to_string(training.batch_size);
  kv["training.lr"] = num(training.lr);
  kv["training.decay_factor"] = num(training.decay_factor);
  kv["training.decay_every"] = std::to_string(training.decay_every);
  kv["training.beta1"] = num(training.beta1);
  kv["training.beta2"] = num(training.beta2);
  kv["training.seed"] = std::to_string(training.seed);
  kv["training.pixel_weight"] = num(training.pixel_weight);
  kv["training.perceptual_weight"] = num(training.perceptual_weight);
  kv["training.perceptual_layers"] = perceptual_layers_string(training.perceptual_layers);
  kv["training.vgg_weights"] = training.vgg_weights;
  kv["training.workers"] = std::to_string(training.workers);
  kv["training.checkpoint_every"] = std::to_string(training.checkpoint_every);
  kv["aug.scale_lo"] = num(aug.scale_lo);
  kv["aug.scale_hi"] = num(aug.scale_hi);
  kv["aug.theta_max_deg"] = num(aug.theta_max * 180.0 / M_PI);
  kv["aug.translate_frac"] = num(aug.translate_max / kImageSize);
  kv["data.root"] = data_root;
  kv["data.mode"] = data_mode;
  kv["data.window"] = std::to_string(temporal_window);
  kv["data.flip"] = temporal_flip ? "1" : "0";
  kv["out.dir"] = out_dir;
  kv["run.deterministic"] = deterministic ? "1" : "0";
  kv["eval.trials"] = std::to_string(eval_trials);
  kv["eval.normalization"] = eval_normalization;
  kv["eval.mode"] = eval_mode;
  {
    std::string s;
    for (const auto& n : eval_n_im) s += (s.empty() ? "" : ",") + n;
    kv["eval.n_im"] = s;
  }
  kv["eval.anchor_a"] = std::to_string(anchor_a);
  kv["eval.anchor_b"] = std::to_string(anchor_b);
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  return os.str();
}

std::string RunConfig::config_hash() const { return hex64(fnv1a(canonical_string())); }

RunConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config file not found: '" + path + "'");
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    auto b = line.find_first_not_of(" \t\r");
    auto e = line.find_last_not_of(" \t\r");
    if (b == std::string::npos) continue;
    line = line.substr(b, e - b + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto key = line.substr(0, eq);
    auto val = line.substr(eq + 1);
    auto ke = key.find_last_not_of(" \t");
    key = key.substr(0, ke + 1);
    auto vb = val.find_first_not_of(" \t");
    val = vb == std::string::npos ? "" : val.substr(vb);
    cfg.apply(key, val);
  }
  return cfg;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) cfg.apply(k, v);
}

void write_manifest(const std::string& path, const RunConfig& cfg,
                    const std::string& command_line) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write manifest '" + path + "'");
  os << "# lmkadapt run manifest v1\n"
     << "code_revision=" << git_describe() << "\n"
     << "config_hash=" << cfg.config_hash() << "\n"
     << "command_line=" << command_line << "\n"
     << cfg.canonical_string();
}

}  // namespace lmk
