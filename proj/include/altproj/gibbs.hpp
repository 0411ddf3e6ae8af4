#ifndef ALTPROJ_GIBBS_HPP
#define ALTPROJ_GIBBS_HPP

// Sampled expectations under auxiliary distributions whose constraint
// features do not factor over the chain (e.g. segment repetitions).

#include <cstdint>
#include <span>
#include <vector>

#include "altproj/constraints.hpp"
#include "altproj/inference.hpp"
#include "altproj/types.hpp"

namespace altproj {

struct SamplerConfig {
  int burn_in = 100;
  int sample_sweeps = 1000;
  std::uint64_t seed = 0;
  int thinning = 1;

  /// Throws ConfigError unless sample_sweeps >= 1, burn_in >= 0 and
  /// thinning divides sample_sweeps exactly.
  void validate() const;
  int retained() const { return sample_sweeps / thinning; }
};

struct SampleEstimate {
  SparseFeatures expected_features;
  /// Empirical node/edge marginals; log_z is not estimated and left at 0.
  Posterior marginals;
  /// E_q[f'] for each entry in ConstraintSet::by_instance[j], same order.
  std::vector<double> constraint_expectations;
  std::vector<double> standard_errors;
  /// E_q[lambda . f + mu . f'], used for the sampled KL estimate.
  double expected_score = 0.0;
  int sample_count = 0;
};

/// Log-potentials of q for instance j restricted to factored constraints:
/// model potentials plus mu_e f'_e for every factored entry touching j.
ChainPotentials factored_aux_potentials(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                                        std::size_t j, const SequenceInstance& inst);

/// Exact conditional of y_position given the rest of `y` under q_{lambda,mu}.
Eigen::VectorXd conditional_site_distribution(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                                              std::size_t j, const SequenceInstance& inst, std::span<const Label> y,
                                              int position);

/// Single-site Gibbs sampler, left-to-right sweeps, started from the Viterbi
/// path of the factored part. Each sweep ends with an independence
/// Metropolis-Hastings move proposing a full path from the factored chain.
/// Global-feature estimates average the site conditionals E[f' | y_-t] over
/// each retained sweep. The generator is seeded with seed ^ j.
SampleEstimate gibbs_expectations(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                                  std::size_t j, const SequenceInstance& inst, const SamplerConfig& sampler);

/// Monte-Carlo estimate of log Z_{lambda,mu}(x) - log Z_lambda(x) =
/// log E_p[exp(mu . f')], drawing exact samples from p_lambda by forward
/// filtering, backward sampling.
double estimate_log_partition_ratio(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                                    std::size_t j, const SequenceInstance& inst, const SamplerConfig& sampler);

}  // namespace altproj

#endif  // ALTPROJ_GIBBS_HPP
