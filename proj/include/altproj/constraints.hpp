#ifndef ALTPROJ_CONSTRAINTS_HPP
#define ALTPROJ_CONSTRAINTS_HPP

// Auxiliary constraint features f'(x, y), their targets u and the convex
// penalty families U (l2, l1 box, affine upper bound) with conjugates U*.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "altproj/inference.hpp"
#include "altproj/types.hpp"

namespace altproj {

enum class ConstraintKind {
  WordLabel,              // classification: trigger present and y == label
  TokenLabel,             // chain: positions t with trigger at t and y_t == label
  SelfTransition,         // chain: #{t : y_{t-1} == y_t}
  TransitionOnPredicate,  // chain: #{t : y_{t-1} != y_t and predicate(x_t) == holds}
  StartLabel,             // chain: y_0 == label
  RepetitionCount,        // chain, global: #segments - #distinct labels
  CustomCount,            // user-supplied f'(x, y); global on chains
};

enum class Scope { PerInstance, PerDataset };

using CustomEvaluator = std::function<double(const SequenceInstance&, std::span<const Label>)>;

struct ConstraintFeature {
  std::size_t id = 0;
  Scope scope = Scope::PerDataset;
  ConstraintKind kind = ConstraintKind::WordLabel;
  std::size_t trigger = 0;  // input feature id (word/token-label) or predicate id
  Label label = 0;
  // word-label: return 1/c instead of 1, c = number of unlabeled instances
  // containing the trigger. Resolved into `value_scale` by scale_targets.
  bool normalize = false;
  double value_scale = 1.0;
  bool predicate_holds = true;
  CustomEvaluator custom;
};

ConstraintFeature word_label(std::size_t trigger, Label label, bool normalize = false);
ConstraintFeature token_label(std::size_t trigger, Label label);
ConstraintFeature self_transition();
ConstraintFeature transition_on_predicate(std::size_t predicate, bool holds);
ConstraintFeature start_label(Label label);
ConstraintFeature repetition_count();
ConstraintFeature custom_count(CustomEvaluator fn);

const char* kind_name(ConstraintKind kind);
std::optional<ConstraintKind> parse_kind(const std::string& name);

/// Kinds that decompose over the nodes and edges of the model's chain. All
/// kinds are factored for flat classification (K labels are enumerated).
bool is_factored(const ConstraintFeature& feature, bool chain);
/// Throws ContractError when `feature` cannot be evaluated on this model type.
void check_compatible(const ConstraintFeature& feature, bool chain);

/// f'(x, y) for a complete assignment.
double evaluate_constraint(const ConstraintFeature& feature, const Instance& inst, Label y);
double evaluate_constraint(const ConstraintFeature& feature, const SequenceInstance& inst, std::span<const Label> y);
double evaluate_constraint(const ConstraintFeature& feature, const SequenceInstance& inst, std::span<const Label> y,
                           bool chain);

/// E_post[f'] from node/edge marginals. Global kinds raise RoutingError.
double expected_constraint(const ConstraintFeature& feature, const Posterior& post, const Instance& inst);
double expected_constraint(const ConstraintFeature& feature, const Posterior& post, const SequenceInstance& inst);
double expected_constraint(const ConstraintFeature& feature, const Posterior& post, const SequenceInstance& inst,
                           bool chain);

/// pot += weight * f'. Global kinds raise RoutingError.
void add_constraint_potentials(const ConstraintFeature& feature, const SequenceInstance& inst, double weight,
                               bool chain, ChainPotentials& pot);

/// Units a proportion target is counted over, for one instance: documents
/// containing the trigger, trigger tokens, transitions, sequences.
double applicable_units(const ConstraintFeature& feature, const SequenceInstance& inst, bool chain);

enum class PenaltyKind { L2, L1Box, Affine };

struct PenaltyFamily {
  PenaltyKind kind = PenaltyKind::L2;
  double beta = 0.01;  // l2 strength 1/(2 beta), or l1 box half-width; unused for affine
};

const char* penalty_name(PenaltyKind kind);
void validate(const PenaltyFamily& penalty);

struct ConjugateValue {
  double value = 0.0;
  double subgradient = 0.0;  // with respect to mu
};

/// U*(-mu) and a subgradient in mu. At the l1 kink (mu == 0) the
/// minimum-norm element of [-u - beta, -u + beta] is returned. The affine
/// sign restriction is enforced by the caller's projection, not here.
ConjugateValue conjugate_value_and_subgradient(const PenaltyFamily& penalty, double mu, double u);

inline constexpr double kFeasibilityTolerance = 1e-3;

/// Primal penalty U(E) for target u. The l1 box and affine families are
/// indicator functions; violations beyond `tolerance * max(1, |u|)` give +inf.
double penalty_value(const PenaltyFamily& penalty, double u, double expectation,
                     double tolerance = kFeasibilityTolerance);

enum class TargetMode { Proportion, AbsoluteCount };

struct ConstraintSpec {
  ConstraintFeature feature;
  TargetMode mode = TargetMode::Proportion;
  double target = 0.0;
  PenaltyFamily penalty;
};

/// One dual variable: a per-dataset spec, or a per-instance spec bound to one
/// unlabeled instance.
struct AuxEntry {
  std::size_t spec = 0;
  std::optional<std::size_t> instance;
  double target = 0.0;
  double beta = 0.0;
};

/// Specs with resolved targets over a particular unlabeled set, and the map
/// from instances to the dual entries that touch them.
struct ConstraintSet {
  std::vector<ConstraintSpec> specs;
  std::vector<bool> active;
  std::vector<AuxEntry> entries;
  std::vector<std::vector<std::size_t>> by_instance;
  std::vector<std::string> warnings;
  bool chain = false;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool has_global() const;
  const ConstraintSpec& spec_of(std::size_t entry) const { return specs[entries[entry].spec]; }
};

/// Scales proportion targets (and l1 box widths) by the number of applicable
/// units in `unlabeled`; absolute counts pass through. A spec with no
/// applicable unit is deactivated with a warning.
ConstraintSet scale_targets(std::vector<ConstraintSpec> specs, std::span<const SequenceInstance> unlabeled, bool chain);
ConstraintSet scale_targets(std::vector<ConstraintSpec> specs, std::span<const Instance> unlabeled);

/// Dual parameters, one per ConstraintSet entry. Affine entries are stored
/// as mu = -nu <= 0, so q ~ exp(lambda . f + mu . f') lowers E_q[f'].
struct AuxParams {
  Eigen::VectorXd mu;
  std::vector<bool> nonpositive;

  AuxParams() = default;
  explicit AuxParams(const ConstraintSet& set);
  /// Non-negative multiplier nu of an affine entry.
  double affine_dual(std::size_t entry) const { return -mu[static_cast<Eigen::Index>(entry)]; }
};

}  // namespace altproj

#endif  // ALTPROJ_CONSTRAINTS_HPP
