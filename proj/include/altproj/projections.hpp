#ifndef ALTPROJ_PROJECTIONS_HPP
#define ALTPROJ_PROJECTIONS_HPP

// Alternating projections: the I-projection picks the auxiliary distribution
// q closest to p_lambda under the constraint penalties (a concave dual over
// mu), the M-projection refits lambda to the moments of q on unlabeled data
// and to the labeled data.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "altproj/constraints.hpp"
#include "altproj/gibbs.hpp"
#include "altproj/inference.hpp"
#include "altproj/types.hpp"

namespace altproj {

enum class TrainMode { Batch, Online };

struct TrainConfig {
  double alpha = 1.0;  // lambda regularizer
  double gamma = 1.0;  // weight of the unlabeled term
  int iterations = 10;  // T: AP rounds (batch) or epochs (online)
  double inner_tolerance = 1e-6;
  int inner_max_iters = 500;
  double eta0 = 0.1;
  TrainMode mode = TrainMode::Batch;
  std::uint64_t seed = 0;
  // Start lambda from the supervised fit on the labeled data instead of 0.
  bool warm_start = false;
  // Sampled expectations for constraint sets with global features.
  SamplerConfig sampler;
  // Stochastic I-projection rounds when expectations are sampled.
  int sampled_inner_iters = 10;
  // Dataset sizes n (all) and m (labeled) for online steps.
  std::optional<std::size_t> online_total;
  std::optional<std::size_t> online_labeled;

  void validate() const;
};

/// Summary of q on one unlabeled instance, enough to evaluate the joint
/// objective against any lambda and to drive the M-projection.
struct AuxSummary {
  Posterior q;                       // marginals of q (log_z: log Z_{lambda,mu})
  std::vector<double> expectations;  // E_q[f'_e] for e in by_instance[j]
  double neg_entropy = 0.0;          // E_q[log q]
  bool approximate = false;          // sampled rather than exact
};

struct APState {
  ParamVector lambda;
  AuxParams mu;
  int iteration = 0;
  std::vector<double> objective_trace;    // after every projection (batch) or epoch (online)
  std::vector<bool> trace_approximate;    // entry uses a sampled KL estimate
  std::vector<Eigen::VectorXd> mu_trace;  // mu after each round
};

/// Exact q_{lambda,mu} for unlabeled instance j; global constraints raise
/// RoutingError. With mu = 0 this is the model posterior.
Posterior aux_posterior(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set, std::size_t j,
                        const SequenceInstance& inst);

/// Exact summary when every constraint on j is factored, Gibbs estimate
/// otherwise.
AuxSummary summarize_aux(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set, std::size_t j,
                         const SequenceInstance& inst, const SamplerConfig& sampler);

/// The I-projection dual g(mu) = sum_e [mu_e u_e - U*_e] - sum_j [log Z_{lambda,mu}(x_j) - log Z_lambda(x_j)],
/// exact inference only. `value_and_ascent` also returns the minimum-norm,
/// sign-respecting steepest ascent direction.
class IProjectionDual {
 public:
  IProjectionDual(const ParamVector& lambda, const ConstraintSet& set, std::span<const SequenceInstance> unlabeled);

  double value(const Eigen::VectorXd& mu) const;
  /// Smooth part of the gradient of g: u - sum_j E_q[f'] - U*'(mu) with the
  /// conjugate derivative taken from the side mu lies on.
  Eigen::VectorXd gradient(const Eigen::VectorXd& mu) const;
  double value_and_ascent(const Eigen::VectorXd& mu, Eigen::VectorXd& direction) const;
  /// Sum over instances of E_q[f'_e].
  Eigen::VectorXd constraint_expectations(const Eigen::VectorXd& mu) const;

 private:
  double evaluate(const Eigen::VectorXd& mu, Eigen::VectorXd* expect) const;

  const ParamVector& lambda_;
  const ConstraintSet& set_;
  std::span<const SequenceInstance> unlabeled_;
  std::vector<double> base_log_z_;
};

/// Maximizes the dual over mu by projected gradient ascent (exact
/// expectations) or by stochastic projected ascent on Gibbs estimates when
/// the set has global features. Starts from `start` when given, else 0.
AuxParams i_projection(const ParamVector& lambda, const ConstraintSet& set,
                       std::span<const SequenceInstance> unlabeled, const TrainConfig& config,
                       const AuxParams* start = nullptr, int round = 0);

/// Negated M-projection objective:
///   sum_i [log Z(x_i) - lambda . f(x_i, y_i)] + alpha/2 |lambda|^2
///     + gamma sum_j [log Z(x_j) - lambda . E_q[f(x_j, y)]].
class MProjectionObjective {
 public:
  MProjectionObjective(std::span<const Posterior> q, std::span<const SequenceInstance> labeled,
                       std::span<const SequenceInstance> unlabeled, const ModelShape& shape, double alpha,
                       double gamma);

  double value_and_gradient(const Eigen::VectorXd& lambda, Eigen::VectorXd& grad) const;

 private:
  std::span<const SequenceInstance> labeled_;
  std::span<const SequenceInstance> unlabeled_;
  ModelShape shape_;
  double alpha_;
  double gamma_;
  Eigen::VectorXd target_moments_;
};

ParamVector m_projection(std::span<const Posterior> q, std::span<const SequenceInstance> labeled,
                         std::span<const SequenceInstance> unlabeled, const ParamVector& start,
                         const TrainConfig& config);

/// Minimizer of the regularized log-loss on labeled data from lambda = 0.
ParamVector supervised_train(std::span<const SequenceInstance> labeled, const ModelShape& shape,
                             const TrainConfig& config);

/// Joint objective
///   sum_i -log p(y_i|x_i) + alpha/2 |lambda|^2 + gamma [sum_j KL(q_j || p_j) + sum_e U_e(E_q f'_e)]
/// for stored summaries of q.
double joint_objective(const ParamVector& lambda, std::span<const AuxSummary> q, const ConstraintSet& set,
                       std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                       const TrainConfig& config);
/// Same with q realized from (lambda, mu); exact for factored constraints.
double joint_objective(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                       std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                       const TrainConfig& config);

APState ap_train(std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                 const ConstraintSet& set, const ModelShape& shape, const TrainConfig& config);

/// One stochastic step on either a labeled instance or unlabeled instance j
/// (`unlabeled_index`) with learning rate 1/(t + 1/eta0), t >= 1.
void online_ap_step(APState& state, const SequenceInstance& inst, std::optional<std::size_t> unlabeled_index,
                    const ConstraintSet& set, const TrainConfig& config, long t);

/// Epochs of online_ap_step over labeled and unlabeled instances in a seeded
/// random order, t = epoch number; the objective is recorded after each
/// epoch.
APState online_ap_train(std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                        const ConstraintSet& set, const ModelShape& shape, const TrainConfig& config);

}  // namespace altproj

#endif  // ALTPROJ_PROJECTIONS_HPP
