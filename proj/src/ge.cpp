#include "altproj/ge.hpp"

#include "altproj/model.hpp"
#include "altproj/optimize.hpp"

namespace altproj {

namespace {

void check_terms(std::span<const GETerm> terms, const ModelShape& shape, std::size_t num_unlabeled) {
  if (shape.chain) throw ContractError("GE is implemented for the flat classifier only");
  for (const auto& term : terms) {
    if (term.feature.kind != ConstraintKind::WordLabel && term.feature.kind != ConstraintKind::CustomCount)
      throw ContractError(std::string("GE term of kind ") + kind_name(term.feature.kind));
    if (term.instance && *term.instance >= num_unlabeled) throw IndexError("GE term bound to a missing instance");
  }
}

bool applies(const GETerm& term, std::size_t j) { return !term.instance || *term.instance == j; }

// f'(x_j, k) for every label k.
Eigen::VectorXd constraint_row(const GETerm& term, const SequenceInstance& inst, int k) {
  Eigen::VectorXd c(k);
  for (Label y = 0; y < k; ++y) c[y] = evaluate_constraint(term.feature, inst, std::span<const Label>(&y, 1), false);
  return c;
}

// Nonzero constraint rows, which do not depend on lambda: for each unlabeled
// instance the (term, row) pairs that can contribute.
class GECache {
 public:
  GECache(std::span<const GETerm> terms, std::span<const SequenceInstance> unlabeled, int k)
      : rows_(unlabeled.size()) {
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      if (unlabeled[j].length() != 1) throw ContractError("classification instances have length one");
      for (std::size_t t = 0; t < terms.size(); ++t) {
        if (!applies(terms[t], j)) continue;
        Eigen::VectorXd c = constraint_row(terms[t], unlabeled[j], k);
        if (!c.isZero(0.0)) rows_[j].emplace_back(t, std::move(c));
      }
    }
  }
  const std::vector<std::pair<std::size_t, Eigen::VectorXd>>& rows(std::size_t j) const { return rows_[j]; }

 private:
  std::vector<std::vector<std::pair<std::size_t, Eigen::VectorXd>>> rows_;
};

// Label posteriors of the unlabeled instances and the summed expectations F_t.
struct GEPass {
  std::vector<Eigen::VectorXd> probs;
  Eigen::VectorXd totals;
};

GEPass expectations(const ParamVector& lambda, std::size_t num_terms, std::span<const SequenceInstance> unlabeled,
                    const GECache& cache) {
  GEPass pass;
  pass.totals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_terms));
  pass.probs.reserve(unlabeled.size());
  for (std::size_t j = 0; j < unlabeled.size(); ++j) {
    const Posterior post = forward_backward(model_potentials(lambda, unlabeled[j]));
    pass.probs.emplace_back(post.node.row(0).transpose());
    for (const auto& [t, c] : cache.rows(j)) pass.totals[static_cast<Eigen::Index>(t)] += pass.probs.back().dot(c);
  }
  return pass;
}

double ge_penalty(std::span<const GETerm> terms, const Eigen::VectorXd& totals) {
  double v = 0.0;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const double r = terms[t].target - totals[static_cast<Eigen::Index>(t)];
    v += terms[t].weight * r * r;
  }
  return v;
}

Eigen::VectorXd ge_gradient_from(const ParamVector& lambda, std::span<const GETerm> terms,
                                 std::span<const SequenceInstance> unlabeled, const GECache& cache,
                                 const GEPass& pass) {
  const ModelShape& shape = lambda.shape;
  const int k = shape.num_labels;
  // d/dlambda of w (u - F)^2 is -2 w (u - F) dF/dlambda, and dF/dlambda is
  // the model covariance of f' with f summed over instances.
  Eigen::VectorXd coef(static_cast<Eigen::Index>(terms.size()));
  for (std::size_t t = 0; t < terms.size(); ++t)
    coef[static_cast<Eigen::Index>(t)] =
        -2.0 * terms[t].weight * (terms[t].target - pass.totals[static_cast<Eigen::Index>(t)]);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.dim()));
  Eigen::VectorXd w(k);
  for (std::size_t j = 0; j < unlabeled.size(); ++j) {
    if (cache.rows(j).empty()) continue;
    const Eigen::VectorXd& p = pass.probs[j];
    w.setZero();
    for (const auto& [t, c] : cache.rows(j))
      w += coef[static_cast<Eigen::Index>(t)] * p.cwiseProduct(c - Eigen::VectorXd::Constant(k, p.dot(c)));
    for (const auto& fv : unlabeled[j].positions[0])
      grad.segment(static_cast<Eigen::Index>(shape.node_index(fv.id, 0)), k) += fv.value * w;
  }
  return grad;
}

std::pair<double, Eigen::VectorXd> objective_and_gradient(const ParamVector& lambda, std::span<const GETerm> terms,
                                                          std::span<const SequenceInstance> labeled,
                                                          std::span<const SequenceInstance> unlabeled, double alpha,
                                                          const GECache& cache) {
  auto [value, grad] = supervised_loss_and_gradient(lambda, labeled, alpha);
  if (!terms.empty()) {
    const GEPass pass = expectations(lambda, terms.size(), unlabeled, cache);
    value += ge_penalty(terms, pass.totals);
    grad += ge_gradient_from(lambda, terms, unlabeled, cache, pass);
  }
  return {value, grad};
}

}  // namespace

std::vector<GETerm> ge_terms(const ConstraintSet& set, double weight) {
  if (set.chain) throw ContractError("GE is implemented for the flat classifier only");
  std::vector<GETerm> terms;
  terms.reserve(set.size());
  for (std::size_t e = 0; e < set.size(); ++e)
    terms.push_back({set.spec_of(e).feature, set.entries[e].target, weight, set.entries[e].instance});
  return terms;
}

double ge_objective(const ParamVector& lambda, std::span<const GETerm> terms,
                    std::span<const SequenceInstance> labeled, std::span<const SequenceInstance> unlabeled,
                    double alpha) {
  check_terms(terms, lambda.shape, unlabeled.size());
  double value = supervised_loss_and_gradient(lambda, labeled, alpha).first;
  if (!terms.empty()) {
    const GECache cache(terms, unlabeled, lambda.shape.num_labels);
    value += ge_penalty(terms, expectations(lambda, terms.size(), unlabeled, cache).totals);
  }
  return value;
}

Eigen::VectorXd ge_gradient(const ParamVector& lambda, std::span<const GETerm> terms,
                            std::span<const SequenceInstance> unlabeled) {
  check_terms(terms, lambda.shape, unlabeled.size());
  const GECache cache(terms, unlabeled, lambda.shape.num_labels);
  return ge_gradient_from(lambda, terms, unlabeled, cache, expectations(lambda, terms.size(), unlabeled, cache));
}

std::pair<double, Eigen::VectorXd> ge_objective_and_gradient(const ParamVector& lambda, std::span<const GETerm> terms,
                                                             std::span<const SequenceInstance> labeled,
                                                             std::span<const SequenceInstance> unlabeled,
                                                             double alpha) {
  check_terms(terms, lambda.shape, unlabeled.size());
  const GECache cache(terms, unlabeled, lambda.shape.num_labels);
  return objective_and_gradient(lambda, terms, labeled, unlabeled, alpha, cache);
}

ParamVector ge_train(std::span<const GETerm> terms, std::span<const SequenceInstance> labeled,
                     std::span<const SequenceInstance> unlabeled, const ModelShape& shape,
                     const TrainConfig& config) {
  config.validate();
  check_terms(terms, shape, unlabeled.size());
  const GECache cache(terms, unlabeled, shape.num_labels);
  ParamVector start =
      (config.warm_start && !labeled.empty()) ? supervised_train(labeled, shape, config) : ParamVector(shape);
  OptimizerOptions opts;
  opts.tolerance = config.inner_tolerance;
  opts.max_iterations = config.inner_max_iters;
  const auto result = minimize(
      [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        auto [v, grad] = objective_and_gradient(ParamVector(shape, x), terms, labeled, unlabeled, config.alpha, cache);
        g = std::move(grad);
        return v;
      },
      start.weights, opts);
  return ParamVector(shape, result.x);
}

}  // namespace altproj
