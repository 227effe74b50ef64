#include "lmk/common.hpp"

#include <sstream>

#ifndef LMK_GIT_DESCRIBE
#define LMK_GIT_DESCRIBE "unknown"
#endif

namespace lmk {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::pretrain: return "pretrain";
    case Regime::scratch: return "scratch";
    case Regime::finetune: return "finetune";
    case Regime::proposed: return "proposed";
  }
  throw std::logic_error("unreachable regime");
}

Regime regime_from_string(const std::string& s) {
  if (s == "pretrain") return Regime::pretrain;
  if (s == "scratch") return Regime::scratch;
  if (s == "finetune") return Regime::finetune;
  if (s == "proposed") return Regime::proposed;
  throw ConfigError("unknown regime '" + s + "' (expected pretrain|scratch|finetune|proposed)");
}

namespace {
// splitmix64, used to decorrelate (seed, index) pairs before seeding.
uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

Rng make_rng(uint64_t seed, uint64_t index) {
  return Rng(mix(mix(seed) ^ mix(index + 1)));
}

uint64_t fnv1a(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  for (int i = 15; i >= 0; --i) os << ((v >> (4 * i)) & 0xf);
  return os.str();
}

std::string git_describe() { return LMK_GIT_DESCRIBE; }

}  // namespace lmk
