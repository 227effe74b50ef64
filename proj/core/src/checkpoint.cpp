#include "lmk/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace lmk {

namespace {

constexpr char kMagic[] = "LMKCKPT1";

void put(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void take(std::istream& is, void* p, size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
}

void put_string(std::ostream& os, const std::string& s) {
  int64_t n = static_cast<int64_t>(s.size());
  put(os, &n, 8);
  put(os, s.data(), s.size());
}

std::string take_string(std::istream& is) {
  int64_t n = 0;
  take(is, &n, 8);
  if (n < 0 || n > (1LL << 31)) throw std::runtime_error("checkpoint: bad string length");
  std::string s(static_cast<size_t>(n), '\0');
  take(is, s.data(), s.size());
  return s;
}

int32_t dtype_code(torch::Dtype d) {
  if (d == torch::kFloat32) return 0;
  if (d == torch::kFloat64) return 1;
  if (d == torch::kInt64) return 2;
  if (d == torch::kUInt8) return 3;
  throw std::runtime_error("checkpoint: unsupported tensor dtype");
}

torch::Dtype code_dtype(int32_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    default: throw std::runtime_error("checkpoint: unknown dtype code");
  }
}

void put_tensor(std::ostream& os, const std::string& name, const torch::Tensor& t) {
  put_string(os, name);
  auto c = t.detach().contiguous();
  int32_t dt = dtype_code(c.scalar_type());
  int32_t nd = static_cast<int32_t>(c.dim());
  put(os, &dt, 4);
  put(os, &nd, 4);
  for (int64_t i = 0; i < nd; ++i) {
    int64_t d = c.size(i);
    put(os, &d, 8);
  }
  put(os, c.data_ptr(), c.numel() * c.element_size());
}

std::pair<std::string, torch::Tensor> take_tensor(std::istream& is) {
  auto name = take_string(is);
  int32_t dt = 0, nd = 0;
  take(is, &dt, 4);
  take(is, &nd, 4);
  std::vector<int64_t> dims(nd);
  for (auto& d : dims) take(is, &d, 8);
  auto t = torch::empty(dims, code_dtype(dt));
  take(is, t.data_ptr(), t.numel() * t.element_size());
  return {name, t};
}

// Batch-norm state (affine parameters and running statistics) by module path.
std::map<std::string, torch::Tensor> norm_state(const torch::nn::Module& m) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& mod : m.named_modules("", false)) {
    if (std::dynamic_pointer_cast<torch::nn::BatchNorm2dImpl>(mod.value())) {
      for (const auto& p : mod.value()->named_parameters(/*recurse=*/false)) {
        out[mod.key() + "." + p.key()] = p.value();
      }
      for (const auto& b : mod.value()->named_buffers(/*recurse=*/false)) {
        out[mod.key() + "." + b.key()] = b.value();
      }
    }
  }
  return out;
}

void section_to(std::map<std::string, torch::Tensor>& dst, const std::string& prefix,
                const std::string& name, torch::Tensor t) {
  dst[name.substr(prefix.size())] = std::move(t);
}

}  // namespace

Checkpoint snapshot(const LandmarkDetector& detector, const GeneratorNet* generator,
                    Regime regime, const std::string& config_hash, int64_t epoch,
                    int64_t step) {
  Checkpoint c;
  c.regime = regime;
  c.K = detector->config().K;
  c.config_hash = config_hash;
  c.detector_config = detector->config();
  c.epoch = epoch;
  c.step = step;
  for (auto&& [name, conv] : detector->conv_layers()) {
    if (conv->projected()) {
      c.core[name] = conv->core.detach().clone();
      c.adapters[name] = conv->adapter.detach().clone();
    } else {
      c.core[name] = conv->weight.detach().clone();
    }
  }
  c.head["head.weight"] = detector->head->weight.detach().clone();
  c.head["head.bias"] = detector->head->bias.detach().clone();
  for (auto& [k, v] : norm_state(*detector)) c.norms[k] = v.detach().clone();
  if (generator) {
    c.generator_config = (*generator)->config();
    for (const auto& p : (*generator)->named_parameters()) {
      c.generator[p.key()] = p.value().detach().clone();
    }
    for (const auto& b : (*generator)->named_buffers()) {
      c.generator[b.key()] = b.value().detach().clone();
    }
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  put(os, kMagic, 8);
  int32_t version = static_cast<int32_t>(c.version);
  put(os, &version, 4);

  std::ostringstream meta;
  meta << "regime=" << to_string(c.regime) << "\n"
       << "K=" << c.K << "\n"
       << "config_hash=" << c.config_hash << "\n"
       << "detector_config=" << c.detector_config.serialize() << "\n";
  if (c.generator_config) meta << "generator_config=" << c.generator_config->serialize() << "\n";
  meta << "epoch=" << c.epoch << "\n"
       << "step=" << c.step << "\n";
  put_string(os, meta.str());

  int32_t count = static_cast<int32_t>(c.core.size() + c.adapters.size() + c.head.size() +
                                       c.norms.size() + c.generator.size());
  put(os, &count, 4);
  for (const auto& [k, v] : c.core) put_tensor(os, "core/" + k, v);
  for (const auto& [k, v] : c.adapters) put_tensor(os, "adapter/" + k, v);
  for (const auto& [k, v] : c.head) put_tensor(os, "head/" + k, v);
  for (const auto& [k, v] : c.norms) put_tensor(os, "norm/" + k, v);
  for (const auto& [k, v] : c.generator) put_tensor(os, "gen/" + k, v);

  int32_t blob_count = static_cast<int32_t>(c.blobs.size());
  put(os, &blob_count, 4);
  for (const auto& [k, v] : c.blobs) {
    put_string(os, k);
    put_string(os, v);
  }
  if (!os) throw std::runtime_error("short write to checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint not found: '" + path + "'");
  char magic[8];
  take(is, magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("'" + path + "' is not a checkpoint (bad magic)");
  }
  Checkpoint c;
  int32_t version = 0;
  take(is, &version, 4);
  if (version != 1) {
    throw std::runtime_error("checkpoint '" + path + "' has unsupported version " +
                             std::to_string(version));
  }
  c.version = version;

  std::istringstream meta(take_string(is));
  std::string line;
  while (std::getline(meta, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "regime") c.regime = regime_from_string(val);
    else if (key == "K") c.K = std::stoll(val);
    else if (key == "config_hash") c.config_hash = val;
    else if (key == "detector_config") c.detector_config = DetectorConfig::deserialize(val);
    else if (key == "generator_config") c.generator_config = GeneratorConfig::deserialize(val);
    else if (key == "epoch") c.epoch = std::stoll(val);
    else if (key == "step") c.step = std::stoll(val);
  }

  int32_t count = 0;
  take(is, &count, 4);
  for (int32_t i = 0; i < count; ++i) {
    auto [name, t] = take_tensor(is);
    if (name.rfind("core/", 0) == 0) section_to(c.core, "core/", name, t);
    else if (name.rfind("adapter/", 0) == 0) section_to(c.adapters, "adapter/", name, t);
    else if (name.rfind("head/", 0) == 0) section_to(c.head, "head/", name, t);
    else if (name.rfind("norm/", 0) == 0) section_to(c.norms, "norm/", name, t);
    else if (name.rfind("gen/", 0) == 0) section_to(c.generator, "gen/", name, t);
    else throw std::runtime_error("checkpoint: unknown tensor section for '" + name + "'");
  }
  int32_t blob_count = 0;
  take(is, &blob_count, 4);
  for (int32_t i = 0; i < blob_count; ++i) {
    auto name = take_string(is);
    c.blobs[name] = take_string(is);
  }
  return c;
}

void install(LandmarkDetector& detector, const Checkpoint& c) {
  if (detector->config().serialize() != c.detector_config.serialize()) {
    throw std::runtime_error("install: detector configuration does not match checkpoint");
  }
  torch::NoGradGuard g;
  for (auto&& [name, conv] : detector->conv_layers()) {
    auto core_it = c.core.find(name);
    if (core_it == c.core.end()) {
      throw std::runtime_error("checkpoint is missing core weights for '" + name + "'");
    }
    if (conv->projected()) {
      conv->core.copy_(core_it->second);
      auto ad = c.adapters.find(name);
      if (ad == c.adapters.end()) {
        throw std::runtime_error("checkpoint is missing the adapter for '" + name + "'");
      }
      conv->adapter.copy_(ad->second);
    } else {
      conv->weight.copy_(core_it->second);
    }
  }
  detector->head->weight.copy_(c.head.at("head.weight"));
  detector->head->bias.copy_(c.head.at("head.bias"));
  for (const auto& p : detector->named_parameters()) {
    auto it = c.norms.find(p.key());
    if (it != c.norms.end()) p.value().copy_(it->second);
  }
  for (const auto& b : detector->named_buffers()) {
    auto it = c.norms.find(b.key());
    if (it != c.norms.end()) b.value().copy_(it->second);
  }
}

void install_generator(GeneratorNet& generator, const Checkpoint& c) {
  if (c.generator.empty()) throw std::runtime_error("checkpoint holds no generator state");
  torch::NoGradGuard g;
  for (const auto& p : generator->named_parameters()) {
    p.value().copy_(c.generator.at(p.key()));
  }
  for (const auto& b : generator->named_buffers()) {
    b.value().copy_(c.generator.at(b.key()));
  }
}

void load_core_into(LandmarkDetector& detector, const Checkpoint& c, bool copy_head) {
  detector->load_core(c.core, c.norms, c.head, copy_head);
}

std::string optimizer_blob(torch::optim::Optimizer& opt) {
  std::ostringstream buf;
  torch::serialize::OutputArchive archive;
  opt.save(archive);
  archive.save_to(buf);
  return buf.str();
}

void load_optimizer_blob(torch::optim::Optimizer& opt, const std::string& blob) {
  std::istringstream buf(blob);
  torch::serialize::InputArchive archive;
  archive.load_from(buf);
  opt.load(archive);
}

}  // namespace lmk
