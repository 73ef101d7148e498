#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mbflow/types.hpp"

namespace mbflow::flow {

enum class Scheme { GradientFlow, MiniBatchFlow, MinimizingMovement };

std::string to_string(Scheme s);
/// Accepts "flow"/"gradient-flow", "mini-batch"/"mini-batch-flow" and
/// "minimizing-movement". Throws InvalidArgument otherwise.
Scheme parse_scheme(const std::string& s);

/// States sampled on strictly increasing time nodes starting at 0.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  Scheme scheme = Scheme::GradientFlow;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double inner_step = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return times.size(); }
  Index dimension() const { return states.empty() ? 0 : states.front().size(); }
  const Vec& final_state() const { return states.back(); }

  /// Appends a node; enforces t_0 = 0, increasing times and a fixed dimension.
  void push(double t, Vec u);
};

/// Sorted union of {k epsilon : k epsilon < T}, T itself, and `uniform_nodes`
/// equispaced nodes on [0, T]. Nodes closer than 1e-12 T are merged. Pass
/// epsilon <= 0 to get the uniform grid alone.
std::vector<double> make_time_grid(double horizon, double epsilon, int uniform_nodes = 201);

}  // namespace mbflow::flow
