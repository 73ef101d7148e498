#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace mbflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Convert a std::vector into an Eigen vector (copies).
inline Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size()));
}

inline std::vector<double> to_std(const Vec& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace mbflow
