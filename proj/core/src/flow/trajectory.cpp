#include "mbflow/flow/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "mbflow/error.hpp"

namespace mbflow::flow {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::GradientFlow: return "gradient-flow";
    case Scheme::MiniBatchFlow: return "mini-batch-flow";
    case Scheme::MinimizingMovement: return "minimizing-movement";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "flow" || s == "gradient-flow") return Scheme::GradientFlow;
  if (s == "mini-batch" || s == "mini-batch-flow") return Scheme::MiniBatchFlow;
  if (s == "minimizing-movement") return Scheme::MinimizingMovement;
  throw InvalidArgument("unknown scheme '" + s + "'");
}

void Trajectory::push(double t, Vec u) {
  if (times.empty()) {
    if (t != 0.0) throw InvalidArgument("Trajectory: first node must be t = 0");
  } else {
    if (!(t > times.back())) throw InvalidArgument("Trajectory: time nodes must increase strictly");
    if (u.size() != states.front().size()) throw InvalidArgument("Trajectory: state dimension changed");
  }
  times.push_back(t);
  states.push_back(std::move(u));
}

std::vector<double> make_time_grid(double horizon, double epsilon, int uniform_nodes) {
  if (!(horizon > 0.0)) throw InvalidArgument("make_time_grid: horizon must be positive");
  if (uniform_nodes < 2) throw InvalidArgument("make_time_grid: need at least two uniform nodes");
  std::vector<double> nodes;
  for (int i = 0; i < uniform_nodes; ++i)
    nodes.push_back(i + 1 == uniform_nodes ? horizon : horizon * i / (uniform_nodes - 1));
  if (epsilon > 0.0) {
    for (std::size_t k = 1;; ++k) {
      const double t = static_cast<double>(k) * epsilon;
      if (t >= horizon) break;
      nodes.push_back(t);
    }
  }
  std::sort(nodes.begin(), nodes.end());
  std::vector<double> out;
  const double merge = 1e-12 * horizon;
  for (double t : nodes) {
    if (!out.empty() && t - out.back() <= merge) {
      if (t == horizon) out.back() = horizon;
      continue;
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace mbflow::flow
