#include "altproj/projections.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "altproj/model.hpp"
#include "altproj/optimize.hpp"

namespace altproj {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("T must be at least 1");
  if (!(inner_tolerance > 0)) throw ConfigError("inner tolerance must be positive");
  if (inner_max_iters < 1) throw ConfigError("inner iteration budget must be positive");
  if (!(alpha >= 0)) throw ConfigError("alpha must be non-negative");
  if (!(gamma >= 0)) throw ConfigError("gamma must be non-negative");
  if (!(eta0 > 0)) throw ConfigError("eta0 must be positive");
  if (sampled_inner_iters < 1) throw ConfigError("sampled inner iterations must be positive");
  sampler.validate();
}

namespace {

AuxParams make_aux(const ConstraintSet& set, const Eigen::VectorXd& mu) {
  AuxParams a(set);
  a.mu = mu;
  return a;
}

bool has_global_on(const ConstraintSet& set, std::size_t j) {
  if (j >= set.by_instance.size()) return false;
  for (std::size_t e : set.by_instance[j])
    if (!is_factored(set.spec_of(e).feature, set.chain)) return true;
  return false;
}

double expected_score(const ChainPotentials& pot, const Posterior& post) {
  double s = pot.node.cwiseProduct(post.node).sum();
  s += pot.edges.cwiseProduct(post.edges).sum();
  return s;
}

PenaltyFamily entry_penalty(const ConstraintSet& set, std::size_t e) {
  return {set.spec_of(e).penalty.kind, set.entries[e].beta};
}

// Steepest feasible ascent component of the dual in mu_e, given the residual
// r = u - E_q[f'] (both already scaled to the share being optimized).
double ascent_component(PenaltyKind kind, double mu, double r, double beta) {
  switch (kind) {
    case PenaltyKind::L2:
      return r - beta * mu;
    case PenaltyKind::L1Box:
      if (mu > 0) return r - beta;
      if (mu < 0) return r + beta;
      if (r > beta) return r - beta;
      if (r < -beta) return r + beta;
      return 0.0;
    case PenaltyKind::Affine:
      return (mu >= 0 && r > 0) ? 0.0 : r;
  }
  return 0.0;
}

// Affine duals stay <= 0; an l1 coordinate that would cross zero stops there.
void project_mu(const ConstraintSet& set, const Eigen::VectorXd& from, Eigen::VectorXd& to) {
  for (std::size_t e = 0; e < set.size(); ++e) {
    const auto i = static_cast<Eigen::Index>(e);
    switch (set.spec_of(e).penalty.kind) {
      case PenaltyKind::Affine:
        to[i] = std::min(to[i], 0.0);
        break;
      case PenaltyKind::L1Box:
        if ((from[i] > 0 && to[i] < 0) || (from[i] < 0 && to[i] > 0)) to[i] = 0.0;
        break;
      case PenaltyKind::L2:
        break;
    }
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Posterior aux_posterior(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set, std::size_t j,
                        const SequenceInstance& inst) {
  if (has_global_on(set, j)) throw RoutingError("instance carries a global constraint; use gibbs_expectations");
  return forward_backward(factored_aux_potentials(lambda, mu, set, j, inst));
}

AuxSummary summarize_aux(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set, std::size_t j,
                         const SequenceInstance& inst, const SamplerConfig& sampler) {
  AuxSummary s;
  const std::vector<std::size_t> none;
  const auto& entries = j < set.by_instance.size() ? set.by_instance[j] : none;
  if (has_global_on(set, j)) {
    SampleEstimate est = gibbs_expectations(lambda, mu, set, j, inst, sampler);
    const double log_z_model = forward_backward(model_potentials(lambda, inst)).log_z;
    s.q = std::move(est.marginals);
    s.q.log_z = log_z_model + estimate_log_partition_ratio(lambda, mu, set, j, inst, sampler);
    s.expectations = std::move(est.constraint_expectations);
    s.neg_entropy = est.expected_score - s.q.log_z;
    s.approximate = true;
    return s;
  }
  const ChainPotentials pot = factored_aux_potentials(lambda, mu, set, j, inst);
  s.q = forward_backward(pot);
  s.neg_entropy = expected_score(pot, s.q) - s.q.log_z;
  s.expectations.reserve(entries.size());
  for (std::size_t e : entries) s.expectations.push_back(expected_constraint(set.spec_of(e).feature, s.q, inst, set.chain));
  return s;
}

// --- I-projection -----------------------------------------------------------

IProjectionDual::IProjectionDual(const ParamVector& lambda, const ConstraintSet& set,
                                 std::span<const SequenceInstance> unlabeled)
    : lambda_(lambda), set_(set), unlabeled_(unlabeled), base_log_z_(unlabeled.size(), 0.0) {
  if (set.by_instance.size() != unlabeled.size()) throw ContractError("constraint set was scaled on a different unlabeled set");
  for (std::size_t j = 0; j < unlabeled.size(); ++j) {
    if (set.by_instance[j].empty()) continue;
    if (has_global_on(set, j)) throw RoutingError("global constraints need the sampled I-projection");
    base_log_z_[j] = forward_backward(model_potentials(lambda, unlabeled[j])).log_z;
  }
}

double IProjectionDual::evaluate(const Eigen::VectorXd& mu, Eigen::VectorXd* expect) const {
  const AuxParams aux = make_aux(set_, mu);
  double g = 0.0;
  for (std::size_t e = 0; e < set_.size(); ++e)
    g -= conjugate_value_and_subgradient(entry_penalty(set_, e), mu[static_cast<Eigen::Index>(e)], set_.entries[e].target).value;
  if (expect) expect->setZero(static_cast<Eigen::Index>(set_.size()));
  for (std::size_t j = 0; j < unlabeled_.size(); ++j) {
    const auto& entries = set_.by_instance[j];
    if (entries.empty()) continue;
    const Posterior post = forward_backward(factored_aux_potentials(lambda_, aux, set_, j, unlabeled_[j]));
    g -= post.log_z - base_log_z_[j];
    if (!expect) continue;
    for (std::size_t e : entries)
      (*expect)[static_cast<Eigen::Index>(e)] += expected_constraint(set_.spec_of(e).feature, post, unlabeled_[j], set_.chain);
  }
  return g;
}

double IProjectionDual::value(const Eigen::VectorXd& mu) const { return evaluate(mu, nullptr); }

Eigen::VectorXd IProjectionDual::constraint_expectations(const Eigen::VectorXd& mu) const {
  Eigen::VectorXd e;
  evaluate(mu, &e);
  return e;
}

Eigen::VectorXd IProjectionDual::gradient(const Eigen::VectorXd& mu) const {
  Eigen::VectorXd expect;
  evaluate(mu, &expect);
  Eigen::VectorXd g(mu.size());
  for (std::size_t e = 0; e < set_.size(); ++e) {
    const auto i = static_cast<Eigen::Index>(e);
    const auto conj = conjugate_value_and_subgradient(entry_penalty(set_, e), mu[i], set_.entries[e].target);
    double d = conj.subgradient;
    if (set_.spec_of(e).penalty.kind == PenaltyKind::L1Box && mu[i] == 0) d = -set_.entries[e].target;
    g[i] = -d - expect[i];
  }
  return g;
}

double IProjectionDual::value_and_ascent(const Eigen::VectorXd& mu, Eigen::VectorXd& direction) const {
  Eigen::VectorXd expect;
  const double g = evaluate(mu, &expect);
  direction.resize(mu.size());
  for (std::size_t e = 0; e < set_.size(); ++e) {
    const auto i = static_cast<Eigen::Index>(e);
    direction[i] = ascent_component(set_.spec_of(e).penalty.kind, mu[i], set_.entries[e].target - expect[i],
                                    set_.entries[e].beta);
  }
  return g;
}

AuxParams i_projection(const ParamVector& lambda, const ConstraintSet& set,
                       std::span<const SequenceInstance> unlabeled, const TrainConfig& config, const AuxParams* start,
                       int round) {
  AuxParams mu(set);
  if (start && static_cast<std::size_t>(start->mu.size()) == set.size()) mu.mu = start->mu;
  if (set.empty()) return mu;
  if (set.by_instance.size() != unlabeled.size()) throw ContractError("constraint set was scaled on a different unlabeled set");

  if (!set.has_global()) {
    const IProjectionDual dual(lambda, set, unlabeled);
    bool bounded = false;
    for (std::size_t e = 0; e < set.size(); ++e) bounded = bounded || set.spec_of(e).penalty.kind != PenaltyKind::L2;
    OptimizerOptions opts;
    opts.tolerance = config.inner_tolerance;
    opts.max_iterations = config.inner_max_iters;
    const auto result = minimize(
        [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
          const double g = dual.value_and_ascent(x, grad);
          grad = -grad;
          return -g;
        },
        mu.mu, opts, bounded ? ProjectionFn([&](const Eigen::VectorXd& from, Eigen::VectorXd& to) { project_mu(set, from, to); })
                             : ProjectionFn());
    mu.mu = result.x;
    return mu;
  }

  // Stochastic projected ascent on sampled expectations. Entry e moves with
  // step 1 / (k * n_e), n_e the number of instances it sums over.
  std::vector<double> fanin(set.size(), 0.0);
  for (const auto& entries : set.by_instance)
    for (std::size_t e : entries) fanin[e] += 1.0;
  for (int k = 1; k <= config.sampled_inner_iters; ++k) {
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(set.size()));
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      const auto& entries = set.by_instance[j];
      if (entries.empty()) continue;
      std::vector<double> values;
      if (has_global_on(set, j)) {
        SamplerConfig sampler = config.sampler;
        sampler.seed = mix_seed(config.sampler.seed, static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(k));
        values = gibbs_expectations(lambda, mu, set, j, unlabeled[j], sampler).constraint_expectations;
      } else {
        const Posterior q = aux_posterior(lambda, mu, set, j, unlabeled[j]);
        for (std::size_t e : entries) values.push_back(expected_constraint(set.spec_of(e).feature, q, unlabeled[j], set.chain));
      }
      for (std::size_t s = 0; s < entries.size(); ++s) expect[static_cast<Eigen::Index>(entries[s])] += values[s];
    }
    const Eigen::VectorXd before = mu.mu;
    for (std::size_t e = 0; e < set.size(); ++e) {
      const auto i = static_cast<Eigen::Index>(e);
      const double d = ascent_component(set.spec_of(e).penalty.kind, mu.mu[i], set.entries[e].target - expect[i],
                                        set.entries[e].beta);
      mu.mu[i] += d / (k * std::max(1.0, fanin[e]));
    }
    project_mu(set, before, mu.mu);
  }
  return mu;
}

// --- M-projection -----------------------------------------------------------

MProjectionObjective::MProjectionObjective(std::span<const Posterior> q, std::span<const SequenceInstance> labeled,
                                           std::span<const SequenceInstance> unlabeled, const ModelShape& shape,
                                           double alpha, double gamma)
    : labeled_(labeled), unlabeled_(unlabeled), shape_(shape), alpha_(alpha), gamma_(gamma),
      target_moments_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.dim()))) {
  for (const auto& inst : labeled) {
    if (!inst.gold) throw ContractError("labeled set contains an unlabeled instance");
    validate_instance(inst, shape);
    add_observed_features(inst, *inst.gold, shape, 1.0, target_moments_);
  }
  if (gamma_ != 0.0) {
    if (q.size() != unlabeled.size()) throw ContractError("need one q posterior per unlabeled instance");
    for (std::size_t j = 0; j < unlabeled.size(); ++j) add_expected_features(q[j], unlabeled[j], shape, gamma_, target_moments_);
  }
}

double MProjectionObjective::value_and_gradient(const Eigen::VectorXd& lambda, Eigen::VectorXd& grad) const {
  const ParamVector params(shape_, lambda);
  double value = 0.5 * alpha_ * lambda.squaredNorm() - lambda.dot(target_moments_);
  grad = alpha_ * lambda - target_moments_;
  for (const auto& inst : labeled_) {
    const Posterior post = forward_backward(model_potentials(params, inst));
    value += post.log_z;
    add_expected_features(post, inst, shape_, 1.0, grad);
  }
  if (gamma_ != 0.0)
    for (const auto& inst : unlabeled_) {
      const Posterior post = forward_backward(model_potentials(params, inst));
      value += gamma_ * post.log_z;
      add_expected_features(post, inst, shape_, gamma_, grad);
    }
  return value;
}

ParamVector m_projection(std::span<const Posterior> q, std::span<const SequenceInstance> labeled,
                         std::span<const SequenceInstance> unlabeled, const ParamVector& start,
                         const TrainConfig& config) {
  const MProjectionObjective objective(q, labeled, unlabeled, start.shape, config.alpha, config.gamma);
  OptimizerOptions opts;
  opts.tolerance = config.inner_tolerance;
  opts.max_iterations = config.inner_max_iters;
  const auto result = minimize(
      [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) { return objective.value_and_gradient(x, g); }, start.weights,
      opts);
  return ParamVector(start.shape, result.x);
}

ParamVector supervised_train(std::span<const SequenceInstance> labeled, const ModelShape& shape,
                             const TrainConfig& config) {
  TrainConfig sup = config;
  sup.gamma = 0.0;
  return m_projection({}, labeled, {}, ParamVector(shape), sup);
}

// --- Joint objective --------------------------------------------------------

double joint_objective(const ParamVector& lambda, std::span<const AuxSummary> q, const ConstraintSet& set,
                       std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                       const TrainConfig& config) {
  double value = 0.5 * config.alpha * lambda.weights.squaredNorm();
  for (const auto& inst : labeled) {
    if (!inst.gold) throw ContractError("labeled set contains an unlabeled instance");
    const ChainPotentials pot = model_potentials(lambda, inst);
    value += forward_backward(pot).log_z - assignment_score(pot, std::span<const Label>(*inst.gold));
  }
  if (config.gamma == 0.0) return value;
  if (q.size() != unlabeled.size()) throw ContractError("need one q summary per unlabeled instance");

  double kl = 0.0;
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(set.size()));
  for (std::size_t j = 0; j < unlabeled.size(); ++j) {
    const ChainPotentials pot = model_potentials(lambda, unlabeled[j]);
    const double log_z = forward_backward(pot).log_z;
    kl += q[j].neg_entropy - expected_score(pot, q[j].q) + log_z;
    if (j < set.by_instance.size())
      for (std::size_t s = 0; s < set.by_instance[j].size(); ++s)
        totals[static_cast<Eigen::Index>(set.by_instance[j][s])] += q[j].expectations[s];
  }
  double penalty = 0.0;
  for (std::size_t e = 0; e < set.size(); ++e)
    penalty += penalty_value(entry_penalty(set, e), set.entries[e].target, totals[static_cast<Eigen::Index>(e)]);
  return value + config.gamma * (kl + penalty);
}

double joint_objective(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                       std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                       const TrainConfig& config) {
  std::vector<AuxSummary> q;
  if (config.gamma != 0.0) {
    q.reserve(unlabeled.size());
    for (std::size_t j = 0; j < unlabeled.size(); ++j)
      q.push_back(summarize_aux(lambda, mu, set, j, unlabeled[j], config.sampler));
  }
  return joint_objective(lambda, q, set, labeled, unlabeled, config);
}

// --- Training loops -----------------------------------------------------------

APState ap_train(std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                 const ConstraintSet& set, const ModelShape& shape, const TrainConfig& config) {
  config.validate();
  if (config.mode == TrainMode::Online) return online_ap_train(labeled, unlabeled, set, shape, config);

  APState state;
  state.mu = AuxParams(set);
  if (config.gamma == 0.0) {
    // The unlabeled term vanishes; every round reduces to the supervised fit.
    state.lambda = labeled.empty() ? ParamVector(shape) : supervised_train(labeled, shape, config);
    const double value = joint_objective(state.lambda, std::span<const AuxSummary>{}, set, labeled, unlabeled, config);
    for (int t = 1; t <= config.iterations; ++t) {
      state.objective_trace.insert(state.objective_trace.end(), 2, value);
      state.trace_approximate.insert(state.trace_approximate.end(), 2, false);
      state.mu_trace.push_back(state.mu.mu);
    }
    state.iteration = config.iterations;
    return state;
  }
  if (unlabeled.empty()) throw ConfigError("gamma > 0 requires unlabeled data");
  if (set.by_instance.size() != unlabeled.size()) throw ContractError("constraint set was scaled on a different unlabeled set");

  state.lambda = (config.warm_start && !labeled.empty()) ? supervised_train(labeled, shape, config) : ParamVector(shape);
  std::vector<AuxSummary> q(unlabeled.size());
  std::vector<Posterior> marginals(unlabeled.size());
  for (int t = 1; t <= config.iterations; ++t) {
    state.mu = i_projection(state.lambda, set, unlabeled, config, &state.mu, t);

    SamplerConfig sampler = config.sampler;
    sampler.seed = mix_seed(config.sampler.seed, static_cast<std::uint64_t>(t), 0xa11ceULL);
    bool approximate = false;
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      q[j] = summarize_aux(state.lambda, state.mu, set, j, unlabeled[j], sampler);
      approximate = approximate || q[j].approximate;
      marginals[j] = q[j].q;
    }
    state.objective_trace.push_back(joint_objective(state.lambda, q, set, labeled, unlabeled, config));
    state.trace_approximate.push_back(approximate);

    state.lambda = m_projection(marginals, labeled, unlabeled, state.lambda, config);
    state.objective_trace.push_back(joint_objective(state.lambda, q, set, labeled, unlabeled, config));
    state.trace_approximate.push_back(approximate);
    state.mu_trace.push_back(state.mu.mu);
    state.iteration = t;
  }
  return state;
}

void online_ap_step(APState& state, const SequenceInstance& inst, std::optional<std::size_t> unlabeled_index,
                    const ConstraintSet& set, const TrainConfig& config, long t) {
  if (!config.online_total || !config.online_labeled) throw ConfigError("online step needs n and m");
  if (t < 1) throw ConfigError("online step index starts at 1");
  const double n = static_cast<double>(*config.online_total);
  const double m = static_cast<double>(*config.online_labeled);
  if (n <= 0) throw ConfigError("online step needs n > 0");
  const double eta = 1.0 / (static_cast<double>(t) + 1.0 / config.eta0);
  const ModelShape& shape = state.lambda.shape;

  const Posterior p = model_posterior(state.lambda, inst);
  Eigen::VectorXd step = (-config.alpha / n) * state.lambda.weights;

  if (!unlabeled_index) {
    if (!inst.gold) throw ContractError("labeled step on an instance without gold labels");
    add_observed_features(inst, *inst.gold, shape, 1.0, step);
    add_expected_features(p, inst, shape, -1.0, step);
    state.lambda.weights += eta * step;
    return;
  }

  const std::size_t j = *unlabeled_index;
  const double n_unlabeled = n - m;
  if (n_unlabeled <= 0) throw ConfigError("online unlabeled step needs n > m");
  // q uses the pre-update lambda and mu.
  Posterior q;
  std::vector<double> expect;
  const std::vector<std::size_t> none;
  const auto& entries = j < set.by_instance.size() ? set.by_instance[j] : none;
  if (has_global_on(set, j)) {
    SamplerConfig sampler = config.sampler;
    sampler.seed = mix_seed(config.sampler.seed, static_cast<std::uint64_t>(t), 0x0a11eULL);
    SampleEstimate est = gibbs_expectations(state.lambda, state.mu, set, j, inst, sampler);
    q = std::move(est.marginals);
    expect = std::move(est.constraint_expectations);
  } else {
    q = aux_posterior(state.lambda, state.mu, set, j, inst);
    for (std::size_t e : entries) expect.push_back(expected_constraint(set.spec_of(e).feature, q, inst, set.chain));
  }

  Eigen::VectorXd e_here = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(set.size()));
  for (std::size_t s = 0; s < entries.size(); ++s) e_here[static_cast<Eigen::Index>(entries[s])] = expect[s];
  const Eigen::VectorXd before = state.mu.mu;
  for (std::size_t e = 0; e < set.size(); ++e) {
    const auto i = static_cast<Eigen::Index>(e);
    const AuxEntry& entry = set.entries[e];
    if (entry.instance && *entry.instance != j) continue;
    // Per-dataset targets and penalties are spread uniformly over the n - m
    // unlabeled instances; per-instance entries use their own target.
    const double share = entry.instance ? 1.0 : 1.0 / n_unlabeled;
    const double d = ascent_component(set.spec_of(e).penalty.kind, before[i], share * entry.target - e_here[i],
                                      share * entry.beta);
    state.mu.mu[i] += eta * d;
  }
  project_mu(set, before, state.mu.mu);

  if (config.gamma != 0.0) {
    add_expected_features(q, inst, shape, config.gamma, step);
    add_expected_features(p, inst, shape, -config.gamma, step);
  }
  state.lambda.weights += eta * step;
}

APState online_ap_train(std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                        const ConstraintSet& set, const ModelShape& shape, const TrainConfig& config) {
  config.validate();
  if (config.gamma > 0 && unlabeled.empty()) throw ConfigError("gamma > 0 requires unlabeled data");
  if (!unlabeled.empty() && set.by_instance.size() != unlabeled.size())
    throw ContractError("constraint set was scaled on a different unlabeled set");

  TrainConfig cfg = config;
  cfg.online_total = labeled.size() + unlabeled.size();
  cfg.online_labeled = labeled.size();

  APState state;
  state.lambda = (config.warm_start && !labeled.empty()) ? supervised_train(labeled, shape, config) : ParamVector(shape);
  state.mu = AuxParams(set);

  std::vector<std::size_t> order(*cfg.online_total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  for (int epoch = 1; epoch <= config.iterations; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    // The rate clock advances once per pass.
    for (std::size_t idx : order) {
      if (idx < labeled.size())
        online_ap_step(state, labeled[idx], std::nullopt, set, cfg, epoch);
      else
        online_ap_step(state, unlabeled[idx - labeled.size()], idx - labeled.size(), set, cfg, epoch);
    }
    state.objective_trace.push_back(joint_objective(state.lambda, state.mu, set, labeled, unlabeled, cfg));
    state.trace_approximate.push_back(set.has_global());
    state.mu_trace.push_back(state.mu.mu);
    state.iteration = epoch;
  }
  return state;
}

}  // namespace altproj
