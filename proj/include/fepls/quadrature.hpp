#pragma once

#include <Eigen/Dense>

#include "fepls/errors.hpp"

namespace fepls {

// Discrete realization of the L2[0,1] inner product: <f,g> = sum_i w_i f(x_i) g(x_i).
// Weights sum to 1 (the integral of the constant function over [0,1]).
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(nodes.size()); }
};

// Composite trapezoid rule on k equally spaced nodes spanning [0,1].
inline QuadratureRule trapezoid_rule(int k = 2001) {
  if (k < 2) throw InvalidArgument("trapezoid_rule: need at least 2 nodes");
  QuadratureRule q;
  q.nodes = Eigen::VectorXd::LinSpaced(k, 0.0, 1.0);
  double h = 1.0 / (k - 1);
  q.weights = Eigen::VectorXd::Constant(k, h);
  q.weights(0) = 0.5 * h;
  q.weights(k - 1) = 0.5 * h;
  return q;
}

}  // namespace fepls
