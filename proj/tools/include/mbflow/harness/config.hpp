#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mbflow/error.hpp"
#include "mbflow/flow/integrators.hpp"
#include "mbflow/flow/trajectory.hpp"
#include "mbflow/types.hpp"

namespace mbflow::harness {

/// Schema violation; the message starts with the offending key path, e.g.
/// "sparse.A[1]: expected a number".
class ConfigError : public InvalidArgument {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : InvalidArgument(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

enum class Family { Custom, Sparse, ConstrainedQp, Obstacle };

std::string to_string(Family f);
Family parse_family(const std::string& s);

/// One sub-potential of a custom system: "quadratic" 1/2 u^T H u + c^T u + k,
/// or "l1" lambda |u|_1.
struct CustomTerm {
  std::string type;
  Mat h;
  Vec c;
  double constant = 0.0;
  double lambda = 0.0;
  Index dimension = 0;

  bool operator==(const CustomTerm& o) const;
};

struct CustomBlock {
  std::vector<CustomTerm> sub_potentials;
  std::vector<double> weights;
  /// 1-based indices as written in the file.
  std::vector<std::vector<int>> batches;
  std::vector<double> batch_probs;
  Vec u0;

  bool operator==(const CustomBlock& o) const;
};

struct SparseBlock {
  Mat a;
  Vec b;
  double lambda = 1.0;
  std::vector<double> pi{0.5, 0.5};
  Vec u0;  // default: zeros
  double h_ref = 0.01;

  bool operator==(const SparseBlock& o) const;
};

struct QpBlock {
  /// Constraint rows a_k . u <= b_k; default: the five-constraint set.
  Mat a;
  Vec b;
  double ud1 = 10.0;
  double yd = 10.0;
  std::vector<double> pi{0.5, 0.25, 0.25};
  Vec u0;  // default (13, 8)
  /// Replace an infeasible u0 by its projection instead of failing.
  bool project_initial = false;
  double h_ref = 1e-3;

  bool operator==(const QpBlock& o) const;
};

struct ObstacleBlock {
  int grid = 20;
  double delta = 1e-8;
  double smooth_width = 1e-10;
  double ramp_halfwidth = 0.1;
  /// Reference step; 0 selects min(epsilon) / 16.
  double h_ref = 0.0;
  bool zero_variance = false;
  /// Times at which (x, y, u) grid snapshots are written; default {T}.
  std::vector<double> snapshot_times;

  bool operator==(const ObstacleBlock&) const = default;
};

/// Random sparse instances with r = ceil(d / 2) rows and U(0, 1) entries.
struct TimingBlock {
  std::vector<int> sizes{5, 50, 100, 200, 400};
  int repeats = 3;
  double epsilon = 0.04;
  double h = 0.01;
  double horizon = 5.0;

  bool operator==(const TimingBlock&) const = default;
};

struct ExperimentConfig {
  Family family = Family::Sparse;
  flow::Scheme scheme = flow::Scheme::MiniBatchFlow;
  double horizon = 0.0;
  std::vector<double> epsilons;
  std::size_t realizations = 0;
  std::uint64_t seed = 0;
  /// Inner step override for segments without exact evolvers (0 = default).
  double inner_step = 0.0;
  flow::InnerIntegrator integrator = flow::InnerIntegrator::ProximalEuler;
  std::string output_dir;

  std::optional<CustomBlock> custom;
  std::optional<SparseBlock> sparse;
  std::optional<QpBlock> constrained_qp;
  std::optional<ObstacleBlock> obstacle;
  std::optional<TimingBlock> timing;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict parse: unknown keys, wrong types, missing required fields and
/// inconsistent dimensions raise ConfigError. All defaults are resolved.
ExperimentConfig from_json(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);
/// Throws ConfigError with path "<file>" when the file cannot be read.
ExperimentConfig parse_config(const std::string& path);

/// Fully resolved form; from_json(to_json(c)) == c.
nlohmann::json to_json(const ExperimentConfig& c);

}  // namespace mbflow::harness
