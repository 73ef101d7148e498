#include "mbflow/flow/batch_system.hpp"

#include <cmath>
#include <sstream>

#include "mbflow/convex/potentials.hpp"
#include "mbflow/error.hpp"

namespace mbflow::flow {

BatchSystem::BatchSystem(BatchSystemData data) : data_(std::move(data)) {
  const auto n = data_.sub_potentials.size();
  if (n == 0) throw InvalidArgument("BatchSystem: no sub-potentials");
  if (data_.weights.size() != n) throw InvalidArgument("BatchSystem: one weight per sub-potential required");
  if (data_.batches.empty()) throw InvalidArgument("BatchSystem: no batches");
  if (data_.batch_probs.size() != data_.batches.size())
    throw InvalidArgument("BatchSystem: one probability per batch required");
  for (const auto& phi : data_.sub_potentials)
    if (!phi) throw InvalidArgument("BatchSystem: null sub-potential");
  dim_ = data_.sub_potentials.front()->dimension();
  for (const auto& phi : data_.sub_potentials)
    if (phi->dimension() != dim_) throw InvalidArgument("BatchSystem: sub-potentials disagree on dimension");
  for (const auto& b : data_.batches)
    for (Index i : b)
      if (i < 0 || static_cast<std::size_t>(i) >= n) throw InvalidArgument("BatchSystem: batch index out of range");

  full_ = data_.full ? data_.full : convex::combine(data_.sub_potentials, data_.weights);
  if (full_->dimension() != dim_) throw InvalidArgument("BatchSystem: full potential has wrong dimension");

  if (!data_.batch_potentials.empty()) {
    if (data_.batch_potentials.size() != data_.batches.size())
      throw InvalidArgument("BatchSystem: one batch potential override per batch required");
    batch_potentials_ = data_.batch_potentials;
    for (const auto& phi : batch_potentials_)
      if (!phi || phi->dimension() != dim_) throw InvalidArgument("BatchSystem: bad batch potential override");
  } else {
    for (const auto& b : data_.batches) {
      std::vector<PotentialPtr> terms;
      for (Index i : b) terms.push_back(data_.sub_potentials[static_cast<std::size_t>(i)]);
      const std::vector<double> w(terms.size(), 1.0 / static_cast<double>(std::max<std::size_t>(1, terms.size())));
      batch_potentials_.push_back(terms.empty() ? nullptr : convex::combine(terms, w));
    }
  }
}

VarianceSplit BatchSystem::split(const Vec& u) const {
  if (data_.split) return data_.split(u);
  VarianceSplit s;
  for (const auto& phi : batch_potentials_) {
    if (!phi) throw Unsupported("BatchSystem::split: empty batch");
    s.xi.push_back(phi->min_norm_subgradient(u));
  }
  s.full = full_->min_norm_subgradient(u);
  return s;
}

std::string to_string(Violation v) {
  switch (v) {
    case Violation::None: return "none";
    case Violation::WeightSum: return "weight sum";
    case Violation::ProbSum: return "probability sum";
    case Violation::NonpositiveProb: return "nonpositive probability";
    case Violation::NegativeWeight: return "negative weight";
    case Violation::EmptyBatch: return "empty batch";
    case Violation::UncoveredIndex: return "uncovered index";
    case Violation::Compatibility: return "compatibility";
  }
  return "unknown";
}

ValidationResult validate_batch_system(const BatchSystem& sys, double tol) {
  auto fail = [](Violation v, const std::string& msg) { return ValidationResult{v, msg}; };
  const auto& p = sys.weights();
  const auto& pi = sys.batch_probs();
  const auto& batches = sys.batches();

  double sp = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) return fail(Violation::NegativeWeight, "weight p_" + std::to_string(i + 1) + " is negative");
    sp += p[i];
  }
  if (std::abs(sp - 1.0) > tol) {
    std::ostringstream os;
    os.precision(17);
    os << "weights sum to " << sp << ", not 1";
    return fail(Violation::WeightSum, os.str());
  }
  double spi = 0.0;
  for (std::size_t j = 0; j < pi.size(); ++j) {
    if (!(pi[j] > 0.0))
      return fail(Violation::NonpositiveProb, "batch probability pi_" + std::to_string(j + 1) + " is not positive");
    spi += pi[j];
  }
  if (std::abs(spi - 1.0) > tol) {
    std::ostringstream os;
    os.precision(17);
    os << "batch probabilities sum to " << spi << ", not 1";
    return fail(Violation::ProbSum, os.str());
  }
  std::vector<double> implied(p.size(), 0.0);
  std::vector<bool> covered(p.size(), false);
  for (std::size_t j = 0; j < batches.size(); ++j) {
    if (batches[j].empty()) return fail(Violation::EmptyBatch, "batch B_" + std::to_string(j + 1) + " is empty");
    for (Index i : batches[j]) {
      implied[static_cast<std::size_t>(i)] += pi[j] / static_cast<double>(batches[j].size());
      covered[static_cast<std::size_t>(i)] = true;
    }
  }
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!covered[i]) return fail(Violation::UncoveredIndex, "index " + std::to_string(i + 1) + " is in no batch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (std::abs(implied[i] - p[i]) > tol) {
      std::ostringstream os;
      os.precision(17);
      os << "p_" << i + 1 << " = " << p[i] << " but the batches imply " << implied[i];
      return fail(Violation::Compatibility, os.str());
    }
  }
  return {};
}

double variance_lambda(const BatchSystem& sys, const Vec& u) {
  const VarianceSplit s = sys.split(u);
  if (s.xi.size() != sys.num_batches()) throw Unsupported("variance_lambda: split has wrong number of batches");
  double lambda = 0.0;
  for (std::size_t j = 0; j < s.xi.size(); ++j) lambda += sys.batch_probs()[j] * (s.xi[j] - s.full).squaredNorm();
  return lambda;
}

double unbiasedness_residual(const BatchSystem& sys, const Vec& u) {
  const VarianceSplit s = sys.split(u);
  Vec mean = Vec::Zero(s.full.size());
  for (std::size_t j = 0; j < s.xi.size(); ++j) mean += sys.batch_probs()[j] * s.xi[j];
  return (mean - s.full).norm();
}

}  // namespace mbflow::flow
