#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mbflow/error.hpp"
#include "mbflow/harness/config.hpp"

namespace mbflow::harness {

struct FileRecord {
  std::string path;  // relative to the run directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct StageTiming {
  std::string name;
  double seconds = 0.0;
};

struct RunManifest {
  std::string command;
  std::string version;
  nlohmann::json config;  // resolved echo
  std::vector<std::uint64_t> seeds;
  std::vector<StageTiming> stages;
  std::vector<FileRecord> files;

  nlohmann::json to_json() const;
};

struct RunOptions {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  unsigned threads = 1;
};

/// Failure during run/sweep/timing with the context needed for the error
/// record: family, epsilon, realization index, seed and flow time when known.
class RunError : public Error {
 public:
  RunError(const std::string& what, std::string kind_, std::string family_)
      : Error(what), kind(std::move(kind_)), family(std::move(family_)) {}

  std::string kind;  // "solver", "invalid-argument", "io", "error"
  std::string family;
  std::optional<double> epsilon;
  std::optional<std::size_t> realization;
  std::optional<std::uint64_t> seed;
  std::optional<double> time;

  nlohmann::json record() const;
};

/// Machine-readable record for any exception escaping a command.
nlohmann::json error_record(const std::exception& e, const std::string& command);

/// Executes the configured scheme. Writes into out_dir:
///   trajectory_eps<i>_reference.csv, trajectory_eps<i>_r0.csv  (t,u_0,...)
///   error_eps<i>.csv                    (t,mean_sq_error,std_err,R)
///   convergence.csv + report.json       (epsilon,sup_mse,std_err,R; fit)
///   snapshot_eps<i>_{reference,r0}_t<k>.csv  (x,y,u; obstacle only)
///   manifest.json                       (written last)
/// With scheme "flow" only trajectory_reference.csv is produced.
RunManifest run(const ExperimentConfig& config, const RunOptions& opts);

/// Error curves and the convergence fit only; needs >= 3 epsilons and R >= 2.
RunManifest sweep(const ExperimentConfig& config, const RunOptions& opts);

struct TimingRow {
  int size = 0;
  double flow_seconds = 0.0;
  double minibatch_seconds = 0.0;
  double speedup = 0.0;  // flow_seconds / minibatch_seconds
};

/// Mean wall-clock of the full explicit-Euler sparse flow and of the
/// explicit-Euler mini-batch descent on random instances (entries U(0, 1),
/// r = ceil(d / 2) rows) per size. Informational only. Writes timing.csv and
/// the manifest.
std::vector<TimingRow> timing_report(const ExperimentConfig& config, const RunOptions& opts,
                                     RunManifest* manifest = nullptr);

/// Checks that every file listed in <dir>/manifest.json exists and matches
/// its hash. Returns the mismatching paths (empty when all match).
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

}  // namespace mbflow::harness
