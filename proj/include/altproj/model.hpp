#ifndef ALTPROJ_MODEL_HPP
#define ALTPROJ_MODEL_HPP

// Conditional log-linear models p(y|x) = exp(lambda . f(x, y)) / Z(x) for
// flat classification and first-order linear chains.

#include <span>
#include <utility>

#include "altproj/inference.hpp"
#include "altproj/types.hpp"

namespace altproj {

/// Log-potentials of p_lambda for one instance. Node scores conjoin the input
/// features with each label; chains share one K x K transition table.
ChainPotentials model_potentials(const ParamVector& params, const SequenceInstance& inst);

Posterior classify_posterior(const ParamVector& params, const Instance& inst, const LabelSpace& labels);
Posterior chain_posterior(const ParamVector& params, const SequenceInstance& inst, const LabelSpace& labels);
LabelSequence viterbi(const ParamVector& params, const SequenceInstance& inst, const LabelSpace& labels);
/// Exhaustive enumeration; refuses when K^L > 1e6.
Posterior brute_force_posterior(const ParamVector& params, const SequenceInstance& inst, const LabelSpace& labels);

/// Posterior for either model type, dispatching on params.shape.chain.
Posterior model_posterior(const ParamVector& params, const SequenceInstance& inst);

/// out += scale * E_post[f(x, y)].
void add_expected_features(const Posterior& post, const SequenceInstance& inst, const ModelShape& shape, double scale,
                           Eigen::VectorXd& out);
/// out += scale * f(x, y).
void add_observed_features(const SequenceInstance& inst, std::span<const Label> y, const ModelShape& shape,
                           double scale, Eigen::VectorXd& out);
/// lambda . f(x, y).
double score(const ParamVector& params, const SequenceInstance& inst, std::span<const Label> y);

SparseFeatures expected_model_features(const Posterior& post, const Instance& inst, const ModelShape& shape);
SparseFeatures expected_model_features(const Posterior& post, const SequenceInstance& inst, const ModelShape& shape);

/// Sum_i -log p(y_i|x_i) + alpha/2 |lambda|^2 and its gradient.
/// Every instance must carry gold labels.
std::pair<double, Eigen::VectorXd> supervised_loss_and_gradient(const ParamVector& params,
                                                                std::span<const SequenceInstance> data, double alpha);
std::pair<double, Eigen::VectorXd> supervised_loss_and_gradient(const ParamVector& params,
                                                                std::span<const Instance> data, double alpha);

}  // namespace altproj

#endif  // ALTPROJ_MODEL_HPP
