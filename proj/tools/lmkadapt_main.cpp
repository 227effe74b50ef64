// lmkadapt: toy-corpus generation, core pretraining, unsupervised adaptation,
// evaluation protocols, and report plotting.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "lmk/config.hpp"
#include "lmk/eval.hpp"
#include "lmk/plot.hpp"
#include "lmk/toy.hpp"
#include "lmk/train.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;  // key=value overrides
  std::string data;
  std::string out;
  std::string core;
  std::string ckpt;
  std::string regime;
  int64_t seed = -1;
  bool deterministic = false;
  bool resume = false;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "flat key=value config file");
  cmd->add_option("--set", f.sets, "override a config key (key=value, repeatable)");
  cmd->add_option("--seed", f.seed, "training/eval seed (overrides config)");
  cmd->add_flag("--deterministic", f.deterministic, "fully reproducible mode");
}

lmk::RunConfig load_config(const CommonFlags& f, const std::string& command_line) {
  lmk::RunConfig cfg;
  if (!f.config_file.empty()) cfg = lmk::parse_config_file(f.config_file);
  for (const auto& kv : f.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw lmk::ConfigError("--set expects key=value, got " + kv);
    cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.data.empty()) cfg.data_root = f.data;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.regime.empty()) cfg.apply("training.regime", f.regime);
  if (f.seed >= 0) cfg.training.seed = static_cast<uint64_t>(f.seed);
  if (f.deterministic) cfg.deterministic = true;
  if (const char* dev = std::getenv("LMKADAPT_DEVICE")) cfg.device = dev;
  cfg.command_line = command_line;
  cfg.validate();
  return cfg;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::localtime(&now));
  return buf;
}

std::string make_run_dir(const lmk::RunConfig& cfg, const std::string& tag) {
  auto dir = fs::path(cfg.out_dir) / (timestamp() + "-" + tag);
  // avoid collisions for runs started within the same second
  int suffix = 1;
  auto candidate = dir;
  while (fs::exists(candidate)) candidate = dir.string() + "-" + std::to_string(suffix++);
  fs::create_directories(candidate);
  return candidate.string();
}

std::string joined_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += " ";
    s += argv[i];
  }
  return s;
}

void apply_determinism(const lmk::RunConfig& cfg) {
  torch::manual_seed(cfg.training.seed);
  if (cfg.deterministic) {
    // Fixed thread count keeps reduction orders identical across runs.
    torch::set_num_threads(torch::get_num_threads());
    at::globalContext().setDeterministicAlgorithms(true, /*warn_only=*/true);
  }
}

lmk::Dataset load_split(const lmk::RunConfig& cfg, const std::string& split) {
  if (cfg.data_root.empty()) throw lmk::ConfigError("data path required (--data or data.root)");
  return lmk::Dataset::load(cfg.data_root, split);
}

int cmd_toydata(int64_t seed, int64_t n, int64_t n_test, const std::string& family,
                const std::string& out, bool force) {
  lmk::write_toy_corpus(out, static_cast<uint64_t>(seed), n, n_test,
                        lmk::toy_family_from_string(family), force);
  std::cout << "wrote toy corpus family " << family << " (" << n << " train";
  if (n_test > 0) std::cout << ", " << n_test << " test";
  std::cout << ") to " << out << std::endl;
  return 0;
}

int cmd_pretrain(const CommonFlags& f, const std::string& command_line) {
  auto cfg = load_config(f, command_line);
  cfg.apply("training.regime", "pretrain");
  apply_determinism(cfg);
  auto train_ds = load_split(cfg, "train");
  std::optional<lmk::Dataset> holdout;
  if (fs::exists(fs::path(cfg.data_root) / "test")) {
    holdout = lmk::Dataset::load(cfg.data_root, "test");
  }
  const auto run_dir = make_run_dir(cfg, "pretrain");
  auto res = lmk::pretrain_core(train_ds, holdout ? &*holdout : nullptr, cfg, run_dir);
  std::cout << "checkpoint: " << res.paths.latest_checkpoint << std::endl;
  return 0;
}

int cmd_adapt(const CommonFlags& f, const std::string& command_line) {
  auto cfg = load_config(f, command_line);
  if (cfg.training.regime == lmk::Regime::pretrain) {
    throw lmk::ConfigError("adapt requires --regime scratch|finetune|proposed");
  }
  const bool needs_core = cfg.training.regime != lmk::Regime::scratch;
  if (needs_core && f.core.empty()) {
    throw std::runtime_error("core checkpoint required for the " +
                             lmk::to_string(cfg.training.regime) + " regime (--core)");
  }
  apply_determinism(cfg);
  std::optional<lmk::Checkpoint> core;
  if (!f.core.empty()) core = lmk::load_checkpoint(f.core);
  auto train_ds = load_split(cfg, "train");
  std::string run_dir;
  if (f.resume) {
    // resume into the newest run directory for this regime
    fs::path best;
    for (const auto& e : fs::directory_iterator(cfg.out_dir)) {
      const auto name = e.path().filename().string();
      if (name.size() > lmk::to_string(cfg.training.regime).size() &&
          name.find(lmk::to_string(cfg.training.regime)) != std::string::npos &&
          (best.empty() || e.path() > best)) {
        best = e.path();
      }
    }
    if (best.empty()) throw std::runtime_error("--resume: no previous run found in " + cfg.out_dir);
    run_dir = best.string();
  } else {
    run_dir = make_run_dir(cfg, lmk::to_string(cfg.training.regime));
  }
  auto res = lmk::adapt(core ? &*core : nullptr, train_ds, cfg, run_dir, f.resume);
  std::cout << "checkpoint: " << res.paths.latest_checkpoint << std::endl;
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& protocol, const std::string& n_im,
             const std::string& command_line) {
  auto cfg = load_config(f, command_line);
  if (!n_im.empty()) cfg.apply("eval.n_im", n_im);
  if (f.ckpt.empty()) throw std::runtime_error("eval requires --ckpt");
  apply_determinism(cfg);
  auto ckpt = lmk::load_checkpoint(f.ckpt);
  auto det_cfg = ckpt.detector_config;
  lmk::LandmarkDetector detector(det_cfg);
  lmk::install(detector, ckpt);
  detector->eval();

  auto test_ds = load_split(cfg, "test");
  const std::string regime_label = lmk::to_string(ckpt.regime);
  lmk::EvalReport report;
  if (protocol == "consistency") {
    report = lmk::run_consistency_protocol(detector, test_ds, cfg, cfg.training.seed,
                                           regime_label);
  } else {
    auto train_ds = load_split(cfg, "train");
    const auto dir = protocol == "forward" ? lmk::Direction::forward : lmk::Direction::backward;
    report = lmk::run_regression_protocol(detector, train_ds, test_ds, dir, cfg,
                                          cfg.training.seed, regime_label);
  }
  fs::path out_dir = f.out.empty() ? fs::path("reports") : fs::path(f.out);
  fs::create_directories(out_dir);
  const auto path = out_dir / (protocol + "-" + regime_label + ".report");
  lmk::write_report(path.string(), report);
  std::cout << "report: " << path.string() << std::endl;
  for (const auto& [label, value] : report.rows) {
    std::cout << "  " << label << " = " << value << std::endl;
  }
  return 0;
}

int cmd_plot(const std::vector<std::string>& report_paths, const std::string& out) {
  if (report_paths.empty()) throw std::runtime_error("plot requires at least one --report");
  std::vector<lmk::EvalReport> regression;
  fs::create_directories(out);
  int written = 0;
  for (const auto& p : report_paths) {
    auto r = lmk::read_report(p);
    if (r.protocol == "consistency") {
      const auto path = fs::path(out) / ("consistency-" + r.regime + ".ppm");
      lmk::plot_point_bars(r, path.string());
      std::cout << "plot: " << path.string() << std::endl;
      ++written;
    } else {
      regression.push_back(std::move(r));
    }
  }
  // one chart per protocol, all regimes overlaid (the table-2 layout)
  for (const std::string proto : {"forward", "backward"}) {
    std::vector<lmk::EvalReport> group;
    for (const auto& r : regression) {
      if (r.protocol == proto) group.push_back(r);
    }
    if (group.empty()) continue;
    const auto path = fs::path(out) / (proto + ".ppm");
    lmk::plot_error_curves(group, path.string());
    std::cout << "plot: " << path.string() << std::endl;
    ++written;
  }
  if (!regression.empty()) {
    const auto table = fs::path(out) / "comparison.csv";
    std::ofstream os(table);
    os << lmk::collate_reports(regression);
    std::cout << "table: " << table.string() << std::endl;
  }
  if (written == 0) throw std::runtime_error("no plottable reports given");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unsupervised landmark adaptation toolkit"};
  app.require_subcommand(1);
  const auto command_line = joined_args(argc, argv);

  // toydata
  auto* toy = app.add_subcommand("toydata", "generate the synthetic sprite corpus");
  int64_t toy_seed = 0, toy_n = 100, toy_n_test = 0;
  std::string toy_family = "A", toy_out;
  bool toy_force = false;
  toy->add_option("--seed", toy_seed);
  toy->add_option("--n", toy_n, "training images");
  toy->add_option("--n-test", toy_n_test, "held-out images (0: none)");
  toy->add_option("--family", toy_family, "A or B");
  toy->add_option("--out", toy_out)->required();
  toy->add_flag("--force", toy_force, "overwrite a non-empty output directory");

  CommonFlags pf, af, ef;
  auto* pre = app.add_subcommand("pretrain", "supervised core training on annotated data");
  add_common(pre, pf);
  pre->add_option("--data", pf.data, "dataset root (train/ and optional test/)");
  pre->add_option("--out", pf.out, "runs directory");

  auto* ad = app.add_subcommand("adapt", "unsupervised adaptation to a new domain");
  add_common(ad, af);
  ad->add_option("--regime", af.regime, "scratch | finetune | proposed");
  ad->add_option("--core", af.core, "core checkpoint (finetune/proposed)");
  ad->add_option("--data", af.data, "unlabeled dataset root");
  ad->add_option("--out", af.out, "runs directory");
  ad->add_flag("--resume", af.resume, "resume from the latest checkpoint");

  auto* ev = app.add_subcommand("eval", "run an evaluation protocol on a checkpoint");
  add_common(ev, ef);
  std::string protocol, n_im_list;
  ev->add_option("--protocol", protocol, "forward | backward | consistency")->required();
  ev->add_option("--ckpt", ef.ckpt, "checkpoint to evaluate")->required();
  ev->add_option("--data", ef.data, "dataset root");
  ev->add_option("--out", ef.out, "report directory (default: reports/)");
  ev->add_option("--n-im", n_im_list, "comma list of regressor training sizes, e.g. 1,10,all");

  auto* pl = app.add_subcommand("plot", "render charts from eval reports");
  std::vector<std::string> report_paths;
  std::string plot_out = "plots";
  pl->add_option("--report", report_paths, "eval report file (repeatable)")->required();
  pl->add_option("--out", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (toy->parsed()) return cmd_toydata(toy_seed, toy_n, toy_n_test, toy_family, toy_out, toy_force);
    if (pre->parsed()) return cmd_pretrain(pf, command_line);
    if (ad->parsed()) return cmd_adapt(af, command_line);
    if (ev->parsed()) {
      if (protocol != "forward" && protocol != "backward" && protocol != "consistency") {
        throw lmk::ConfigError("--protocol must be forward, backward, or consistency");
      }
      return cmd_eval(ef, protocol, n_im_list, command_line);
    }
    if (pl->parsed()) return cmd_plot(report_paths, plot_out);
  } catch (const std::exception& e) {
    std::cerr << "lmkadapt: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
