#ifndef ALTPROJ_GE_HPP
#define ALTPROJ_GE_HPP

// Generalized-expectation baseline for the flat classifier: squared
// differences between constraint targets and model expectations are added
// directly to the supervised loss.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "altproj/constraints.hpp"
#include "altproj/projections.hpp"
#include "altproj/types.hpp"

namespace altproj {

struct GETerm {
  ConstraintFeature feature;  // word-label or custom-count
  double target = 0.0;
  double weight = 1.0;
  // Restricts the expectation sum to one unlabeled instance.
  std::optional<std::size_t> instance;
};

/// One term per entry of a classification constraint set, every term with
/// the given weight.
std::vector<GETerm> ge_terms(const ConstraintSet& set, double weight);

/// sum_i -log p(y_i|x_i) + alpha/2 |lambda|^2 + sum_t w_t (u_t - F_t)^2, with
/// F_t the summed model expectation of the term's feature on unlabeled data.
double ge_objective(const ParamVector& lambda, std::span<const GETerm> terms,
                    std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                    double alpha);

/// Gradient of the GE terms alone, via model covariances.
Eigen::VectorXd ge_gradient(const ParamVector& lambda, std::span<const GETerm> terms,
                            std::span<const SequenceInstance> unlabeled);

std::pair<double, Eigen::VectorXd> ge_objective_and_gradient(const ParamVector& lambda, std::span<const GETerm> terms,
                                                             std::span<const SequenceInstance> labeled,
                                                             std::span<const SequenceInstance> unlabeled,
                                                             double alpha);

/// Uses alpha, inner_tolerance, inner_max_iters and warm_start from config.
ParamVector ge_train(std::span<const GETerm> terms, std::span<const SequenceInstance> labeled,
                     std::span<const SequenceInstance> unlabeled, const ModelShape& shape,
                     const TrainConfig& config);

}  // namespace altproj

#endif  // ALTPROJ_GE_HPP
