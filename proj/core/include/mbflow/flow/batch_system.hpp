#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mbflow/convex/potential.hpp"

namespace mbflow::flow {

using convex::PotentialPtr;

/// Per-batch subgradient selections xi_j(u) together with the least-norm
/// subgradient of the full potential at the same state. A split is unbiased
/// when sum_j pi_j xi_j(u) equals `full`.
struct VarianceSplit {
  std::vector<Vec> xi;
  Vec full;
};

using SplitProvider = std::function<VarianceSplit(const Vec&)>;

/// Everything needed to build a BatchSystem. Batches hold 0-based indices
/// into `sub_potentials`.
struct BatchSystemData {
  std::vector<PotentialPtr> sub_potentials;
  std::vector<double> weights;
  std::vector<std::vector<Index>> batches;
  std::vector<double> batch_probs;

  /// Optional replacement for combine(sub_potentials, weights), for families
  /// where the generic weighted sum loses structure (e.g. a shared constraint).
  PotentialPtr full;
  /// Optional replacements for the batch averages, one per batch when given.
  std::vector<PotentialPtr> batch_potentials;
  /// Optional family-specific split. Without one the split is the least-norm
  /// subgradient of each batch potential, which is unbiased wherever the
  /// batch potentials are differentiable.
  SplitProvider split;
};

/// Phi = sum_i p_i Phi_i with batches B_j drawn with probability pi_j. The
/// batch potential is the plain average Phi_B = |B|^-1 sum_{i in B} Phi_i, so
/// compatibility p_i = sum_{j : i in B_j} pi_j / |B_j| makes E[Phi_B] = Phi.
///
/// The constructor checks only structure (sizes, index ranges, dimensions);
/// the numeric relations are checked by validate_batch_system.
class BatchSystem {
 public:
  explicit BatchSystem(BatchSystemData data);

  Index dimension() const { return dim_; }
  std::size_t num_sub_potentials() const { return data_.sub_potentials.size(); }
  std::size_t num_batches() const { return data_.batches.size(); }

  const std::vector<PotentialPtr>& sub_potentials() const { return data_.sub_potentials; }
  const std::vector<double>& weights() const { return data_.weights; }
  const std::vector<std::vector<Index>>& batches() const { return data_.batches; }
  const std::vector<double>& batch_probs() const { return data_.batch_probs; }

  const convex::Potential& full() const { return *full_; }
  PotentialPtr full_ptr() const { return full_; }
  const convex::Potential& batch(std::size_t j) const { return *batch_potentials_.at(j); }
  PotentialPtr batch_ptr(std::size_t j) const { return batch_potentials_.at(j); }

  bool has_custom_split() const { return static_cast<bool>(data_.split); }
  VarianceSplit split(const Vec& u) const;

 private:
  BatchSystemData data_;
  Index dim_ = 0;
  PotentialPtr full_;
  std::vector<PotentialPtr> batch_potentials_;
};

enum class Violation { None, WeightSum, ProbSum, NonpositiveProb, NegativeWeight, EmptyBatch, UncoveredIndex, Compatibility };

struct ValidationResult {
  Violation violation = Violation::None;
  std::string message;
  bool ok() const { return violation == Violation::None; }
};

std::string to_string(Violation v);

/// Checks, in order: nonnegative weights summing to 1, positive batch
/// probabilities summing to 1, nonempty batches covering every index, and
/// p_i = sum_{j : i in B_j} pi_j / |B_j|. Tolerance 1e-12 throughout. Returns
/// the first violated relation.
ValidationResult validate_batch_system(const BatchSystem& sys, double tol = 1e-12);

/// Lambda(u) = sum_j pi_j |xi_j(u) - dPhi(u)°|^2 for the system's split.
double variance_lambda(const BatchSystem& sys, const Vec& u);

/// |sum_j pi_j xi_j(u) - dPhi(u)°|.
double unbiasedness_residual(const BatchSystem& sys, const Vec& u);

}  // namespace mbflow::flow
