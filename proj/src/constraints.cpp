#include "altproj/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace altproj {

ConstraintFeature word_label(std::size_t trigger, Label label, bool normalize) {
  ConstraintFeature f;
  f.kind = ConstraintKind::WordLabel;
  f.trigger = trigger;
  f.label = label;
  f.normalize = normalize;
  return f;
}

ConstraintFeature token_label(std::size_t trigger, Label label) {
  ConstraintFeature f;
  f.kind = ConstraintKind::TokenLabel;
  f.trigger = trigger;
  f.label = label;
  return f;
}

ConstraintFeature self_transition() {
  ConstraintFeature f;
  f.kind = ConstraintKind::SelfTransition;
  return f;
}

ConstraintFeature transition_on_predicate(std::size_t predicate, bool holds) {
  ConstraintFeature f;
  f.kind = ConstraintKind::TransitionOnPredicate;
  f.trigger = predicate;
  f.predicate_holds = holds;
  f.scope = Scope::PerInstance;
  return f;
}

ConstraintFeature start_label(Label label) {
  ConstraintFeature f;
  f.kind = ConstraintKind::StartLabel;
  f.label = label;
  return f;
}

ConstraintFeature repetition_count() {
  ConstraintFeature f;
  f.kind = ConstraintKind::RepetitionCount;
  f.scope = Scope::PerInstance;
  return f;
}

ConstraintFeature custom_count(CustomEvaluator fn) {
  ConstraintFeature f;
  f.kind = ConstraintKind::CustomCount;
  f.custom = std::move(fn);
  return f;
}

const char* kind_name(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::WordLabel: return "word-label";
    case ConstraintKind::TokenLabel: return "token-label";
    case ConstraintKind::SelfTransition: return "self-transition";
    case ConstraintKind::TransitionOnPredicate: return "transition-on-predicate";
    case ConstraintKind::StartLabel: return "start-label";
    case ConstraintKind::RepetitionCount: return "repetition-count";
    case ConstraintKind::CustomCount: return "custom-count";
  }
  return "?";
}

std::optional<ConstraintKind> parse_kind(const std::string& name) {
  for (auto k : {ConstraintKind::WordLabel, ConstraintKind::TokenLabel, ConstraintKind::SelfTransition,
                 ConstraintKind::TransitionOnPredicate, ConstraintKind::StartLabel, ConstraintKind::RepetitionCount,
                 ConstraintKind::CustomCount})
    if (name == kind_name(k)) return k;
  return std::nullopt;
}

bool is_factored(const ConstraintFeature& feature, bool chain) {
  if (!chain) return true;
  return feature.kind != ConstraintKind::RepetitionCount && feature.kind != ConstraintKind::CustomCount;
}

void check_compatible(const ConstraintFeature& feature, bool chain) {
  const bool ok = chain ? feature.kind != ConstraintKind::WordLabel
                        : (feature.kind == ConstraintKind::WordLabel || feature.kind == ConstraintKind::CustomCount);
  if (!ok)
    throw ContractError(std::string(kind_name(feature.kind)) + " constraint is not defined for " +
                        (chain ? "sequence" : "classification") + " instances");
  if (feature.kind == ConstraintKind::CustomCount && !feature.custom)
    throw ContractError("custom-count constraint without an evaluator");
}

namespace {

bool has_trigger(const SparseFeatures& x, std::size_t id) { return x.contains(id); }

bool predicate_matches(const ConstraintFeature& f, const SparseFeatures& x) {
  return has_trigger(x, f.trigger) == f.predicate_holds;
}

double repetitions(std::span<const Label> y) {
  int segments = y.empty() ? 0 : 1;
  for (std::size_t t = 1; t < y.size(); ++t)
    if (y[t] != y[t - 1]) ++segments;
  std::vector<Label> seen(y.begin(), y.end());
  std::sort(seen.begin(), seen.end());
  const auto distinct = std::unique(seen.begin(), seen.end()) - seen.begin();
  return static_cast<double>(segments - distinct);
}

}  // namespace

double evaluate_constraint(const ConstraintFeature& f, const SequenceInstance& inst, std::span<const Label> y,
                           bool chain) {
  check_compatible(f, chain);
  if (y.size() != inst.positions.size()) throw ContractError("assignment length differs from instance length");
  const auto& pos = inst.positions;
  double v = 0.0;
  switch (f.kind) {
    case ConstraintKind::WordLabel:
      v = (has_trigger(pos[0], f.trigger) && y[0] == f.label) ? 1.0 : 0.0;
      break;
    case ConstraintKind::TokenLabel:
      for (std::size_t t = 0; t < y.size(); ++t)
        if (y[t] == f.label && has_trigger(pos[t], f.trigger)) v += 1.0;
      break;
    case ConstraintKind::SelfTransition:
      for (std::size_t t = 1; t < y.size(); ++t)
        if (y[t] == y[t - 1]) v += 1.0;
      break;
    case ConstraintKind::TransitionOnPredicate:
      for (std::size_t t = 1; t < y.size(); ++t)
        if (y[t] != y[t - 1] && predicate_matches(f, pos[t])) v += 1.0;
      break;
    case ConstraintKind::StartLabel:
      v = y[0] == f.label ? 1.0 : 0.0;
      break;
    case ConstraintKind::RepetitionCount:
      v = repetitions(y);
      break;
    case ConstraintKind::CustomCount:
      v = f.custom(inst, y);
      break;
  }
  return f.value_scale * v;
}

double evaluate_constraint(const ConstraintFeature& feature, const Instance& inst, Label y) {
  const Label ys[1] = {y};
  return evaluate_constraint(feature, as_sequence(inst), ys, false);
}

double evaluate_constraint(const ConstraintFeature& feature, const SequenceInstance& inst, std::span<const Label> y) {
  return evaluate_constraint(feature, inst, y, true);
}

double expected_constraint(const ConstraintFeature& f, const Posterior& post, const SequenceInstance& inst,
                           bool chain) {
  check_compatible(f, chain);
  if (!is_factored(f, chain))
    throw RoutingError(std::string(kind_name(f.kind)) + " is a global constraint; use gibbs_expectations");
  const auto& pos = inst.positions;
  const int k = post.labels();
  double v = 0.0;
  if (!chain) {
    for (Label y = 0; y < k; ++y) {
      const Label ys[1] = {y};
      const double fy = f.kind == ConstraintKind::CustomCount ? f.custom(inst, ys)
                        : (has_trigger(pos[0], f.trigger) && y == f.label ? 1.0 : 0.0);
      v += post.node(0, y) * fy;
    }
    return f.value_scale * v;
  }
  switch (f.kind) {
    case ConstraintKind::TokenLabel:
      for (int t = 0; t < post.length(); ++t)
        if (has_trigger(pos[static_cast<std::size_t>(t)], f.trigger)) v += post.node(t, f.label);
      break;
    case ConstraintKind::SelfTransition:
      for (int t = 0; t < post.num_edges(); ++t) v += post.edge(t).diagonal().sum();
      break;
    case ConstraintKind::TransitionOnPredicate:
      for (int t = 1; t < post.length(); ++t)
        if (predicate_matches(f, pos[static_cast<std::size_t>(t)]))
          v += post.edge(t - 1).sum() - post.edge(t - 1).diagonal().sum();
      break;
    case ConstraintKind::StartLabel:
      v = post.node(0, f.label);
      break;
    default:
      break;
  }
  return f.value_scale * v;
}

double expected_constraint(const ConstraintFeature& feature, const Posterior& post, const Instance& inst) {
  return expected_constraint(feature, post, as_sequence(inst), false);
}

double expected_constraint(const ConstraintFeature& feature, const Posterior& post, const SequenceInstance& inst) {
  return expected_constraint(feature, post, inst, true);
}

void add_constraint_potentials(const ConstraintFeature& f, const SequenceInstance& inst, double weight, bool chain,
                               ChainPotentials& pot) {
  check_compatible(f, chain);
  if (!is_factored(f, chain))
    throw RoutingError(std::string(kind_name(f.kind)) + " is a global constraint; use gibbs_expectations");
  if (weight == 0.0) return;
  const double w = weight * f.value_scale;
  const auto& pos = inst.positions;
  const int k = pot.labels();
  if (!chain) {
    for (Label y = 0; y < k; ++y) {
      const Label ys[1] = {y};
      const double fy = f.kind == ConstraintKind::CustomCount ? f.custom(inst, ys)
                        : (has_trigger(pos[0], f.trigger) && y == f.label ? 1.0 : 0.0);
      pot.node(0, y) += w * fy;
    }
    return;
  }
  switch (f.kind) {
    case ConstraintKind::TokenLabel:
      for (int t = 0; t < pot.length(); ++t)
        if (has_trigger(pos[static_cast<std::size_t>(t)], f.trigger)) pot.node(t, f.label) += w;
      break;
    case ConstraintKind::SelfTransition:
      for (int t = 0; t < pot.num_edges(); ++t) pot.edge(t).diagonal().array() += w;
      break;
    case ConstraintKind::TransitionOnPredicate:
      for (int t = 1; t < pot.length(); ++t)
        if (predicate_matches(f, pos[static_cast<std::size_t>(t)])) {
          auto e = pot.edge(t - 1);
          e.array() += w;
          e.diagonal().array() -= w;
        }
      break;
    case ConstraintKind::StartLabel:
      pot.node(0, f.label) += w;
      break;
    default:
      break;
  }
}

double applicable_units(const ConstraintFeature& f, const SequenceInstance& inst, bool chain) {
  const auto& pos = inst.positions;
  switch (f.kind) {
    case ConstraintKind::WordLabel:
      return has_trigger(pos[0], f.trigger) ? 1.0 : 0.0;
    case ConstraintKind::TokenLabel: {
      double n = 0;
      for (const auto& x : pos)
        if (has_trigger(x, f.trigger)) n += 1;
      return n;
    }
    case ConstraintKind::SelfTransition:
      return chain ? static_cast<double>(pos.size() - 1) : 0.0;
    case ConstraintKind::TransitionOnPredicate: {
      double n = 0;
      for (std::size_t t = 1; t < pos.size(); ++t)
        if (predicate_matches(f, pos[t])) n += 1;
      return n;
    }
    case ConstraintKind::StartLabel:
    case ConstraintKind::RepetitionCount:
    case ConstraintKind::CustomCount:
      return 1.0;
  }
  return 0.0;
}

const char* penalty_name(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::L2: return "l2";
    case PenaltyKind::L1Box: return "l1box";
    case PenaltyKind::Affine: return "affine";
  }
  return "?";
}

void validate(const PenaltyFamily& p) {
  if (!std::isfinite(p.beta)) throw ContractError("penalty beta must be finite");
  if (p.kind == PenaltyKind::L2 && p.beta <= 0) throw ContractError("l2 penalty needs beta > 0");
  if (p.kind == PenaltyKind::L1Box && p.beta < 0) throw ContractError("l1 box needs beta >= 0");
}

ConjugateValue conjugate_value_and_subgradient(const PenaltyFamily& p, double mu, double u) {
  switch (p.kind) {
    case PenaltyKind::L2:
      return {-mu * u + 0.5 * p.beta * mu * mu, -u + p.beta * mu};
    case PenaltyKind::L1Box: {
      double sub;
      if (mu > 0)
        sub = -u + p.beta;
      else if (mu < 0)
        sub = -u - p.beta;
      else
        sub = std::clamp(0.0, -u - p.beta, -u + p.beta);
      return {-mu * u + p.beta * std::abs(mu), sub};
    }
    case PenaltyKind::Affine:
      return {-mu * u, -u};
  }
  return {};
}

double penalty_value(const PenaltyFamily& p, double u, double e, double tolerance) {
  const double slack = tolerance * std::max(1.0, std::abs(u));
  switch (p.kind) {
    case PenaltyKind::L2:
      return (u - e) * (u - e) / (2.0 * p.beta);
    case PenaltyKind::L1Box:
      return std::abs(u - e) <= p.beta + slack ? 0.0 : std::numeric_limits<double>::infinity();
    case PenaltyKind::Affine:
      return e <= u + slack ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

bool ConstraintSet::has_global() const {
  for (std::size_t s = 0; s < specs.size(); ++s)
    if (active[s] && !is_factored(specs[s].feature, chain)) return true;
  return false;
}

ConstraintSet scale_targets(std::vector<ConstraintSpec> specs, std::span<const SequenceInstance> unlabeled,
                            bool chain) {
  ConstraintSet set;
  set.chain = chain;
  set.by_instance.resize(unlabeled.size());
  set.active.assign(specs.size(), true);
  for (std::size_t s = 0; s < specs.size(); ++s) {
    auto& spec = specs[s];
    spec.feature.id = s;
    check_compatible(spec.feature, chain);
    validate(spec.penalty);
    if (spec.mode == TargetMode::Proportion && (spec.target < 0 || spec.target > 1))
      throw ContractError("proportion target outside [0, 1]");

    std::vector<double> units(unlabeled.size());
    double total = 0;
    for (std::size_t j = 0; j < unlabeled.size(); ++j) {
      units[j] = applicable_units(spec.feature, unlabeled[j], chain);
      total += units[j];
    }
    if (total == 0) {
      set.active[s] = false;
      set.warnings.push_back(std::string("constraint ") + std::to_string(s) + " (" + kind_name(spec.feature.kind) +
                             ") has no applicable units in the unlabeled data; deactivated");
      continue;
    }
    if (spec.feature.kind == ConstraintKind::WordLabel && spec.feature.normalize) spec.feature.value_scale = 1.0 / total;

    const double scale = spec.feature.value_scale;
    auto resolve = [&](double n) {
      AuxEntry e;
      e.spec = s;
      const bool proportion = spec.mode == TargetMode::Proportion;
      e.target = proportion ? spec.target * n * scale : spec.target;
      e.beta = (proportion && spec.penalty.kind == PenaltyKind::L1Box) ? spec.penalty.beta * n * scale : spec.penalty.beta;
      return e;
    };
    if (spec.feature.scope == Scope::PerDataset) {
      const std::size_t entry = set.entries.size();
      set.entries.push_back(resolve(total));
      for (std::size_t j = 0; j < unlabeled.size(); ++j)
        if (units[j] > 0) set.by_instance[j].push_back(entry);
    } else {
      for (std::size_t j = 0; j < unlabeled.size(); ++j) {
        if (units[j] == 0) continue;
        AuxEntry e = resolve(units[j]);
        e.instance = j;
        set.by_instance[j].push_back(set.entries.size());
        set.entries.push_back(e);
      }
    }
  }
  set.specs = std::move(specs);
  return set;
}

ConstraintSet scale_targets(std::vector<ConstraintSpec> specs, std::span<const Instance> unlabeled) {
  std::vector<SequenceInstance> seqs;
  seqs.reserve(unlabeled.size());
  for (const auto& x : unlabeled) seqs.push_back(as_sequence(x));
  return scale_targets(std::move(specs), seqs, false);
}

AuxParams::AuxParams(const ConstraintSet& set)
    : mu(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(set.size()))), nonpositive(set.size(), false) {
  for (std::size_t e = 0; e < set.size(); ++e) nonpositive[e] = set.spec_of(e).penalty.kind == PenaltyKind::Affine;
}

}  // namespace altproj
