#pragma once

#include <Eigen/Dense>
#include <vector>

namespace cfs {

struct TransportPlan {
  Eigen::MatrixXd flow;  // m x n, row sums = supply, column sums = demand
  double cost = 0.0;
  std::size_t pivots = 0;
};

/// Exact balanced transportation problem
///   min sum c_ij x_ij  s.t.  x 1 = supply, x^T 1 = demand, x >= 0
/// by the transportation simplex (north-west corner start, u-v potentials,
/// Bland's rule against cycling on degenerate bases).
/// Throws ArgumentError when the marginals are negative or unbalanced.
TransportPlan solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                              const Eigen::MatrixXd& cost);

}  // namespace cfs
