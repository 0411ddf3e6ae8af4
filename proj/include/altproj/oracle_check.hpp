#ifndef ALTPROJ_ORACLE_CHECK_HPP
#define ALTPROJ_ORACLE_CHECK_HPP

// Randomized self-checks: exact inference against enumeration, analytic
// gradients against central differences, and coordinate-descent
// monotonicity of the joint objective. Backs the `oracle-check` command.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "altproj/constraints.hpp"
#include "altproj/types.hpp"

namespace altproj {

struct RandomProblemSpec {
  bool chain = true;
  int max_labels = 4;
  int max_length = 5;
  std::size_t num_inputs = 6;
  std::size_t labeled = 3;
  std::size_t unlabeled = 4;
  double weight_scale = 0.7;
};

struct RandomProblem {
  ModelShape shape;
  ParamVector lambda;
  std::vector<SequenceInstance> labeled;
  std::vector<SequenceInstance> unlabeled;
  std::vector<ConstraintSpec> constraints;  // factored kinds, l2 penalties
};

/// Small random problem; K is drawn from [2, max_labels] and lengths from
/// [1, max_length] (always 1 for classification).
RandomProblem random_problem(const RandomProblemSpec& spec, std::mt19937_64& rng);

/// Central differences of f at x with step h.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double h = 1e-5);

/// |a - b|_inf / max(|a|_inf, |b|_inf), 0 when both vanish.
double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct OracleResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct OracleCheckOptions {
  std::uint64_t seed = 0;
  int inference_cases = 100;
  int gradient_cases = 20;
  int monotonicity_cases = 5;
  double inference_tolerance = 1e-9;
  double gradient_tolerance = 1e-4;
  double monotonicity_tolerance = 1e-8;
};

std::vector<OracleResult> run_oracle_checks(const OracleCheckOptions& options);

}  // namespace altproj

#endif  // ALTPROJ_ORACLE_CHECK_HPP
