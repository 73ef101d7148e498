#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "mbflow/harness/config.hpp"
#include "mbflow/harness/io.hpp"
#include "mbflow/harness/run.hpp"
#include "mbflow/version.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mbflow::harness;

unsigned default_threads() {
  if (const char* env = std::getenv("MBFLOW_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring malformed MBFLOW_THREADS='" << env << "'\n";
  }
  return 1;
}

int report_failure(const std::exception& e, const std::string& command, const std::string& out_dir) {
  const auto rec = error_record(e, command);
  std::cerr << rec.dump() << "\n";
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    try {
      write_file(fs::path(out_dir) / "error.json", rec.dump(2) + "\n");
    } catch (const std::exception&) {
      // the record on stderr is all we can do
    }
  }
  const std::string kind = rec.value("kind", "error");
  if (kind == "config") return 2;
  if (kind == "solver" || kind == "invalid-argument") return 3;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mini-batch gradient flow experiments"};
  app.set_version_flag("--version", MBFLOW_VERSION_STRING);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = default_threads();

  auto add_common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    if (needs_out) {
      sub->add_option("--out", out_dir, "run directory (overrides output_dir)");
      sub->add_option("--seed", seed, "base seed (overrides the config)");
      sub->add_option("--threads", threads, "worker threads, 0 = all cores (default: MBFLOW_THREADS or 1)");
    }
  };
  auto* run_cmd = app.add_subcommand("run", "run the configured scheme and write trajectories, error curves and fit");
  auto* sweep_cmd = app.add_subcommand("sweep", "error curves and slope fit over the epsilon list");
  auto* timing_cmd = app.add_subcommand("timing", "wall-clock table: full flow vs mini-batch descent");
  auto* validate_cmd = app.add_subcommand("validate", "parse the config and print it with defaults resolved");
  add_common(run_cmd, true);
  add_common(sweep_cmd, true);
  add_common(timing_cmd, true);
  add_common(validate_cmd, false);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const ExperimentConfig cfg = parse_config(config_path);
    if (command == "validate") {
      std::cout << to_json(cfg).dump(2) << "\n";
      return 0;
    }
    if (out_dir.empty()) out_dir = cfg.output_dir;
    RunOptions opts;
    opts.out_dir = out_dir;
    opts.seed = seed;
    opts.threads = threads;
    if (command == "run" || command == "sweep") {
      const auto m = command == "run" ? run(cfg, opts) : sweep(cfg, opts);
      std::cout << "wrote " << m.files.size() + 1 << " files to " << out_dir << "\n";
      for (const auto& s : m.stages) std::cout << "  " << s.name << ": " << format_double(s.seconds) << " s\n";
    } else {
      const auto rows = timing_report(cfg, opts);
      std::cout << "size  flow_s  minibatch_s  speedup\n";
      for (const auto& r : rows)
        std::cout << r.size << "  " << r.flow_seconds << "  " << r.minibatch_seconds << "  " << r.speedup << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    return report_failure(e, command, out_dir);
  }
}
