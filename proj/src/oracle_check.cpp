#include "altproj/oracle_check.hpp"

#include <cmath>
#include <sstream>

#include "altproj/ge.hpp"
#include "altproj/model.hpp"
#include "altproj/projections.hpp"

namespace altproj {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int integer(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

SequenceInstance random_instance(std::mt19937_64& rng, const ModelShape& shape, int length, bool labeled) {
  SequenceInstance inst;
  for (int t = 0; t < length; ++t) {
    std::vector<FeatureValue> fv;
    for (std::size_t f = 0; f < shape.num_inputs; ++f)
      if (uniform(rng, 0, 1) < 0.4) fv.push_back({f, uniform(rng, 0, 1) < 0.5 ? 1.0 : uniform(rng, 0.2, 2.0)});
    inst.positions.emplace_back(std::move(fv));
  }
  if (labeled) {
    LabelSequence y;
    for (int t = 0; t < length; ++t) y.push_back(integer(rng, 0, shape.num_labels - 1));
    inst.gold = std::move(y);
  }
  return inst;
}

struct Tally {
  int failures = 0;
  double worst = 0.0;
  std::string first;

  void record(double err, double tol, const std::string& what) {
    worst = std::max(worst, std::isnan(err) ? INFINITY : err);
    if (!(err <= tol)) {
      if (failures == 0) first = what;
      ++failures;
    }
  }
  OracleResult result(const std::string& name, int cases) const {
    std::ostringstream d;
    d << cases << " cases, worst error " << worst;
    if (failures) d << ", " << failures << " failures (first: " << first << ")";
    return {name, failures == 0, d.str()};
  }
};

double max_abs(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.size() ? (a - b).cwiseAbs().maxCoeff() : 0.0;
}

Eigen::VectorXd random_mu(std::mt19937_64& rng, std::size_t n) {
  Eigen::VectorXd mu(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < mu.size(); ++i) mu[i] = uniform(rng, -1.0, 1.0);
  return mu;
}

}  // namespace

RandomProblem random_problem(const RandomProblemSpec& spec, std::mt19937_64& rng) {
  RandomProblem p;
  p.shape = ModelShape{spec.num_inputs, integer(rng, 2, std::max(2, spec.max_labels)), spec.chain};
  p.lambda = ParamVector(p.shape);
  for (Eigen::Index i = 0; i < p.lambda.weights.size(); ++i)
    p.lambda.weights[i] = uniform(rng, -spec.weight_scale, spec.weight_scale);
  const auto length = [&]() { return spec.chain ? integer(rng, 1, spec.max_length) : 1; };
  for (std::size_t i = 0; i < spec.labeled; ++i) p.labeled.push_back(random_instance(rng, p.shape, length(), true));
  for (std::size_t i = 0; i < spec.unlabeled; ++i) p.unlabeled.push_back(random_instance(rng, p.shape, length(), false));

  const auto feature = [&]() { return static_cast<std::size_t>(integer(rng, 0, static_cast<int>(spec.num_inputs) - 1)); };
  const auto label = [&]() { return integer(rng, 0, p.shape.num_labels - 1); };
  const auto add = [&](ConstraintFeature f) {
    ConstraintSpec s;
    s.feature = std::move(f);
    s.target = uniform(rng, 0.1, 0.9);
    s.penalty = {PenaltyKind::L2, uniform(rng, 0.2, 1.0)};
    p.constraints.push_back(std::move(s));
  };
  if (spec.chain) {
    add(token_label(feature(), label()));
    add(token_label(feature(), label()));
    add(self_transition());
    add(start_label(label()));
    add(transition_on_predicate(feature(), uniform(rng, 0, 1) < 0.5));
  } else {
    for (int i = 0; i < 3; ++i) add(word_label(feature(), label()));
  }
  return p;
}

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.size() ? a.cwiseAbs().maxCoeff() : 0.0, b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  if (scale == 0.0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

std::vector<OracleResult> run_oracle_checks(const OracleCheckOptions& options) {
  std::vector<OracleResult> results;
  std::mt19937_64 rng(options.seed);

  {
    Tally tally;
    RandomProblemSpec spec;
    spec.labeled = 0;
    spec.unlabeled = 1;
    for (int c = 0; c < options.inference_cases; ++c) {
      RandomProblem p = random_problem(spec, rng);
      const SequenceInstance& inst = p.unlabeled[0];
      const LabelSpace labels = LabelSpace::anonymous(p.shape.num_labels);
      const Posterior fb = chain_posterior(p.lambda, inst, labels);
      const Posterior bf = brute_force_posterior(p.lambda, inst, labels);
      double err = std::abs(fb.log_z - bf.log_z);
      err = std::max(err, max_abs(fb.node, bf.node));
      err = std::max(err, max_abs(fb.edges, bf.edges));
      Eigen::VectorXd e_fb = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.shape.dim()));
      Eigen::VectorXd e_bf = e_fb;
      add_expected_features(fb, inst, p.shape, 1.0, e_fb);
      add_expected_features(bf, inst, p.shape, 1.0, e_bf);
      err = std::max(err, max_abs(e_fb, e_bf));
      // Viterbi must reach the enumerated maximum score.
      const ChainPotentials pot = model_potentials(p.lambda, inst);
      double best = -INFINITY;
      for_each_assignment(inst.length(), p.shape.num_labels,
                          [&](std::span<const Label> y) { best = std::max(best, assignment_score(pot, y)); });
      const LabelSequence path = viterbi(p.lambda, inst, labels);
      err = std::max(err, std::abs(assignment_score(pot, std::span<const Label>(path)) - best));
      tally.record(err, options.inference_tolerance, "case " + std::to_string(c));
    }
    results.push_back(tally.result("chain inference vs enumeration", options.inference_cases));
  }

  const auto gradient_suite = [&](const std::string& name, bool chain,
                                  const std::function<std::pair<Eigen::VectorXd, Eigen::VectorXd>(RandomProblem&)>& pair) {
    Tally tally;
    RandomProblemSpec spec;
    spec.chain = chain;
    spec.max_length = 4;
    spec.max_labels = 3;
    for (int c = 0; c < options.gradient_cases; ++c) {
      RandomProblem p = random_problem(spec, rng);
      const auto [analytic, numeric] = pair(p);
      tally.record(relative_error(analytic, numeric), options.gradient_tolerance, "case " + std::to_string(c));
    }
    results.push_back(tally.result(name, options.gradient_cases));
  };

  const double alpha = 0.5;
  gradient_suite("supervised gradient vs finite differences", true, [&](RandomProblem& p) {
    const auto f = [&](const Eigen::VectorXd& w) {
      return supervised_loss_and_gradient(ParamVector(p.shape, w), p.labeled, alpha).first;
    };
    return std::make_pair(supervised_loss_and_gradient(p.lambda, p.labeled, alpha).second,
                          numeric_gradient(f, p.lambda.weights));
  });

  gradient_suite("M-projection gradient vs finite differences", true, [&](RandomProblem& p) {
    const ConstraintSet set = scale_targets(p.constraints, p.unlabeled, true);
    AuxParams mu(set);
    mu.mu = random_mu(rng, set.size());
    std::vector<Posterior> q;
    for (std::size_t j = 0; j < p.unlabeled.size(); ++j) q.push_back(aux_posterior(p.lambda, mu, set, j, p.unlabeled[j]));
    const MProjectionObjective obj(q, p.labeled, p.unlabeled, p.shape, alpha, 0.7);
    Eigen::VectorXd g;
    obj.value_and_gradient(p.lambda.weights, g);
    const auto f = [&](const Eigen::VectorXd& w) {
      Eigen::VectorXd unused;
      return obj.value_and_gradient(w, unused);
    };
    return std::make_pair(g, numeric_gradient(f, p.lambda.weights));
  });

  gradient_suite("I-projection dual gradient vs finite differences", true, [&](RandomProblem& p) {
    const ConstraintSet set = scale_targets(p.constraints, p.unlabeled, true);
    const IProjectionDual dual(p.lambda, set, p.unlabeled);
    const Eigen::VectorXd mu = random_mu(rng, set.size());
    return std::make_pair(dual.gradient(mu),
                          numeric_gradient([&](const Eigen::VectorXd& m) { return dual.value(m); }, mu));
  });

  gradient_suite("GE gradient vs finite differences", false, [&](RandomProblem& p) {
    const ConstraintSet set = scale_targets(p.constraints, p.unlabeled, false);
    const std::vector<GETerm> terms = ge_terms(set, 0.8);
    const auto f = [&](const Eigen::VectorXd& w) {
      return ge_objective(ParamVector(p.shape, w), terms, p.labeled, p.unlabeled, alpha);
    };
    return std::make_pair(ge_objective_and_gradient(p.lambda, terms, p.labeled, p.unlabeled, alpha).second,
                          numeric_gradient(f, p.lambda.weights));
  });

  {
    Tally tally;
    RandomProblemSpec spec;
    spec.max_labels = 3;
    for (int c = 0; c < options.monotonicity_cases; ++c) {
      RandomProblem p = random_problem(spec, rng);
      const ConstraintSet set = scale_targets(p.constraints, p.unlabeled, true);
      TrainConfig config;
      config.alpha = alpha;
      config.gamma = 0.7;
      config.iterations = 5;
      const APState state = ap_train(p.labeled, p.unlabeled, set, p.shape, config);
      double rise = 0.0;
      for (std::size_t i = 1; i < state.objective_trace.size(); ++i)
        rise = std::max(rise, state.objective_trace[i] - state.objective_trace[i - 1]);
      tally.record(rise, options.monotonicity_tolerance, "case " + std::to_string(c));
    }
    results.push_back(tally.result("joint objective monotone under AP", options.monotonicity_cases));
  }
  return results;
}

}  // namespace altproj
