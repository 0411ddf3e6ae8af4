#ifndef ALTPROJ_OPTIMIZE_HPP
#define ALTPROJ_OPTIMIZE_HPP

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace altproj {

/// Returns f(x) and writes the descent-relevant gradient into `grad`. For
/// nonsmooth or bound-constrained problems `grad` must be the minimum-norm
/// subgradient restricted to feasible directions, so that a zero vector
/// certifies optimality.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;
/// Maps a trial point back onto the feasible set, given the point it left.
using ProjectionFn = std::function<void(const Eigen::VectorXd& from, Eigen::VectorXd& to)>;

struct OptimizerOptions {
  double tolerance = 1e-6;  // infinity norm of the gradient
  int max_iterations = 500;
  double armijo = 1e-4;
  int max_backtracks = 60;
  int memory = 10;  // L-BFGS pairs; unconstrained problems only
};

enum class OptimizerStatus { Converged, MaxIterations, LineSearchExhausted };

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  OptimizerStatus status = OptimizerStatus::MaxIterations;
  std::vector<double> trace;  // objective after every accepted step, starting value first
};

const char* status_name(OptimizerStatus status);

/// L-BFGS when `project` is empty, otherwise projected gradient descent with
/// Barzilai-Borwein trial steps. Both backtrack (halving) until the Armijo
/// test holds, so the trace is monotone. Throws OptimizationError when the
/// starting point has a non-finite value.
OptimizerResult minimize(const ObjectiveFn& fn, Eigen::VectorXd x0, const OptimizerOptions& options,
                         const ProjectionFn& project = {});

}  // namespace altproj

#endif  // ALTPROJ_OPTIMIZE_HPP
