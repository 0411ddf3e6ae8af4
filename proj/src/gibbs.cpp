#include "altproj/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "altproj/model.hpp"

namespace altproj {

void SamplerConfig::validate() const {
  if (sample_sweeps < 1) throw ConfigError("sampler needs at least one sample sweep");
  if (burn_in < 0) throw ConfigError("burn-in must be non-negative");
  if (thinning < 1) throw ConfigError("thinning must be positive");
  if (sample_sweeps % thinning != 0) throw ConfigError("thinning must divide the number of sample sweeps");
}

ChainPotentials factored_aux_potentials(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                                        std::size_t j, const SequenceInstance& inst) {
  ChainPotentials pot = model_potentials(lambda, inst);
  if (j < set.by_instance.size())
    for (std::size_t e : set.by_instance[j]) {
      const auto& f = set.spec_of(e).feature;
      if (is_factored(f, set.chain)) add_constraint_potentials(f, inst, mu.mu[static_cast<Eigen::Index>(e)], set.chain, pot);
    }
  return pot;
}

namespace {

// Global feature with its dual weight. Repetition counts are maintained
// incrementally (label occupancy and boundary count); custom features are
// re-evaluated on the full assignment.
class GlobalTerm {
 public:
  GlobalTerm(const ConstraintFeature& f, double weight, int labels) : f_(&f), weight_(weight), counts_(static_cast<std::size_t>(labels), 0) {}

  double weight() const { return weight_; }

  void reset(const SequenceInstance& inst, std::span<const Label> y) {
    if (f_->kind == ConstraintKind::RepetitionCount) {
      std::fill(counts_.begin(), counts_.end(), 0);
      boundaries_ = 0;
      for (std::size_t t = 0; t < y.size(); ++t) {
        ++counts_[static_cast<std::size_t>(y[t])];
        if (t > 0 && y[t] != y[t - 1]) ++boundaries_;
      }
      distinct_ = static_cast<int>(std::count_if(counts_.begin(), counts_.end(), [](int c) { return c > 0; }));
    } else {
      value_ = evaluate_constraint(*f_, inst, y, true);
    }
  }

  double value() const {
    if (f_->kind == ConstraintKind::RepetitionCount) return f_->value_scale * (1 + boundaries_ - distinct_);
    return value_;
  }

  /// Feature value with y_t replaced by each candidate label.
  void candidates(const SequenceInstance& inst, LabelSequence& y, int t, Eigen::VectorXd& out) const {
    const int k = static_cast<int>(out.size());
    const auto ut = static_cast<std::size_t>(t);
    if (f_->kind == ConstraintKind::RepetitionCount) {
      const Label old = y[ut];
      const bool has_prev = t > 0;
      const bool has_next = ut + 1 < y.size();
      const int old_local = (has_prev && y[ut - 1] != old) + (has_next && y[ut + 1] != old);
      for (Label z = 0; z < k; ++z) {
        if (z == old) {
          out[z] = value();
          continue;
        }
        const int new_local = (has_prev && y[ut - 1] != z) + (has_next && y[ut + 1] != z);
        const int distinct = distinct_ - (counts_[static_cast<std::size_t>(old)] == 1) + (counts_[static_cast<std::size_t>(z)] == 0);
        out[z] = f_->value_scale * (1 + boundaries_ - old_local + new_local - distinct);
      }
      return;
    }
    const Label old = y[ut];
    for (Label z = 0; z < k; ++z) {
      y[ut] = z;
      out[z] = evaluate_constraint(*f_, inst, y, true);
    }
    y[ut] = old;
  }

  void commit(const SequenceInstance& inst, std::span<const Label> y, int t, Label old) {
    if (f_->kind != ConstraintKind::RepetitionCount) {
      value_ = evaluate_constraint(*f_, inst, y, true);
      return;
    }
    const auto ut = static_cast<std::size_t>(t);
    const Label now = y[ut];
    if (now == old) return;
    const bool has_prev = t > 0;
    const bool has_next = ut + 1 < y.size();
    boundaries_ += ((has_prev && y[ut - 1] != now) + (has_next && y[ut + 1] != now)) -
                   ((has_prev && y[ut - 1] != old) + (has_next && y[ut + 1] != old));
    if (--counts_[static_cast<std::size_t>(old)] == 0) --distinct_;
    if (counts_[static_cast<std::size_t>(now)]++ == 0) ++distinct_;
  }

 private:
  const ConstraintFeature* f_;
  double weight_;
  std::vector<int> counts_;
  int distinct_ = 0;
  int boundaries_ = 0;
  double value_ = 0.0;
};

struct SiteModel {
  ChainPotentials pot;
  std::vector<GlobalTerm> globals;
  std::vector<std::size_t> global_slots;  // position within by_instance[j]

  SiteModel(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set, std::size_t j,
            const SequenceInstance& inst)
      : pot(factored_aux_potentials(lambda, mu, set, j, inst)) {
    if (!set.chain) throw ContractError("Gibbs sampling applies to sequence models only");
    check_finite(pot);
    if (j < set.by_instance.size()) {
      const auto& entries = set.by_instance[j];
      for (std::size_t s = 0; s < entries.size(); ++s) {
        const auto& f = set.spec_of(entries[s]).feature;
        if (!is_factored(f, true)) {
          globals.emplace_back(f, mu.mu[static_cast<Eigen::Index>(entries[s])], lambda.shape.num_labels);
          global_slots.push_back(s);
        }
      }
    }
  }

  void reset(const SequenceInstance& inst, std::span<const Label> y) {
    for (auto& g : globals) g.reset(inst, y);
  }

  void logits(const SequenceInstance& inst, LabelSequence& y, int t, Eigen::VectorXd& out, Eigen::VectorXd& scratch) const {
    const auto ut = static_cast<std::size_t>(t);
    out = pot.node.row(t).transpose();
    if (t > 0) out += pot.edge(t - 1).row(y[ut - 1]).transpose();
    if (ut + 1 < y.size()) out += pot.edge(t).col(y[ut + 1]);
    for (const auto& g : globals) {
      if (g.weight() == 0.0) continue;
      g.candidates(inst, y, t, scratch);
      out += g.weight() * scratch;
    }
  }
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double lz = log_sum_exp(logits);
  return (logits.array() - lz).exp().matrix();
}

Label draw(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  const int k = static_cast<int>(probs.size());
  for (Label z = 0; z < k - 1; ++z) {
    u -= probs[z];
    if (u < 0) return z;
  }
  return k - 1;
}

// Exact draws from the chain defined by `pot`: forward filtering, backward
// sampling. The backward conditionals are tabulated once as cumulative
// distributions, so a draw is a scan per position.
class ChainSampler {
 public:
  explicit ChainSampler(const ChainPotentials& pot) : len_(pot.length()), k_(pot.labels()) {
    Eigen::MatrixXd alpha(len_, k_);
    Eigen::VectorXd work(k_);
    alpha.row(0) = pot.node.row(0);
    for (int t = 1; t < len_; ++t)
      for (int b = 0; b < k_; ++b) {
        work = alpha.row(t - 1).transpose() + pot.edge(t - 1).col(b);
        alpha(t, b) = pot.node(t, b) + log_sum_exp(work);
      }
    last_ = cumulative(alpha.row(len_ - 1).transpose());
    cdf_ = Eigen::MatrixXd(k_, static_cast<Eigen::Index>(k_) * std::max(0, len_ - 1));
    for (int t = 0; t + 1 < len_; ++t)
      for (int b = 0; b < k_; ++b)
        cdf_.col(static_cast<Eigen::Index>(t) * k_ + b) = cumulative(alpha.row(t).transpose() + pot.edge(t).col(b));
  }

  void draw_into(LabelSequence& y, std::mt19937_64& rng) const {
    y.resize(static_cast<std::size_t>(len_));
    y[static_cast<std::size_t>(len_ - 1)] = scan(last_, rng);
    for (int t = len_ - 2; t >= 0; --t)
      y[static_cast<std::size_t>(t)] =
          scan(cdf_.col(static_cast<Eigen::Index>(t) * k_ + y[static_cast<std::size_t>(t + 1)]), rng);
  }

 private:
  static Eigen::VectorXd cumulative(const Eigen::VectorXd& logw) {
    Eigen::VectorXd c = (logw.array() - logw.maxCoeff()).exp();
    for (Eigen::Index i = 1; i < c.size(); ++i) c[i] += c[i - 1];
    return c / c[c.size() - 1];
  }

  template <typename Column>
  Label scan(const Column& cdf, std::mt19937_64& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (Label z = 0; z < k_ - 1; ++z)
      if (u < cdf[z]) return z;
    return k_ - 1;
  }

  int len_;
  int k_;
  Eigen::VectorXd last_;
  Eigen::MatrixXd cdf_;  // column t * K + b: cdf of y_t given y_{t+1} = b
};

}  // namespace

Eigen::VectorXd conditional_site_distribution(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                                              std::size_t j, const SequenceInstance& inst, std::span<const Label> y,
                                              int position) {
  if (y.size() != inst.positions.size()) throw ContractError("assignment length differs from instance length");
  if (position < 0 || position >= inst.length()) throw ContractError("position out of range");
  SiteModel model(lambda, mu, set, j, inst);
  LabelSequence work(y.begin(), y.end());
  model.reset(inst, work);
  Eigen::VectorXd logits(lambda.shape.num_labels);
  Eigen::VectorXd scratch(lambda.shape.num_labels);
  model.logits(inst, work, position, logits, scratch);
  return softmax(logits);
}

SampleEstimate gibbs_expectations(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                                  std::size_t j, const SequenceInstance& inst, const SamplerConfig& sampler) {
  sampler.validate();
  const int len = inst.length();
  const int k = lambda.shape.num_labels;
  if (len < 1) throw ContractError("instance has no positions");

  SiteModel model(lambda, mu, set, j, inst);
  LabelSequence y = viterbi_decode(model.pot);
  model.reset(inst, y);

  const std::vector<std::size_t> no_entries;
  const auto& entries = j < set.by_instance.size() ? set.by_instance[j] : no_entries;
  std::vector<double> sum(entries.size(), 0.0);
  std::vector<double> sumsq(entries.size(), 0.0);
  std::vector<double> values(entries.size(), 0.0);

  SampleEstimate est;
  est.marginals.node = Eigen::MatrixXd::Zero(len, k);
  est.marginals.edges = Eigen::MatrixXd::Zero(k, static_cast<Eigen::Index>(k) * (len - 1));

  std::mt19937_64 rng(sampler.seed ^ static_cast<std::uint64_t>(j));
  Eigen::VectorXd logits(k);
  Eigen::VectorXd scratch(k);
  // Global features are Rao-Blackwellized: each retained sweep contributes
  // the average over sites of E[f' | y_-t], taken just before y_t is redrawn.
  std::vector<double> smoothed(model.globals.size(), 0.0);
  Eigen::VectorXd cand(k);
  Eigen::VectorXd probs(k);
  std::optional<ChainSampler> proposals;
  if (!model.globals.empty()) proposals.emplace(model.pot);
  LabelSequence proposal;
  std::vector<GlobalTerm> next = model.globals;
  const int total = sampler.burn_in + sampler.sample_sweeps;
  for (int sweep = 0; sweep < total; ++sweep) {
    const int kept = sweep - sampler.burn_in;
    const bool retain = kept >= 0 && (kept + 1) % sampler.thinning == 0;
    std::fill(smoothed.begin(), smoothed.end(), 0.0);
    for (int t = 0; t < len; ++t) {
      model.logits(inst, y, t, logits, scratch);
      probs = (logits.array() - logits.maxCoeff()).exp();
      probs /= probs.sum();
      if (retain)
        for (std::size_t g = 0; g < model.globals.size(); ++g) {
          model.globals[g].candidates(inst, y, t, cand);
          smoothed[g] += probs.dot(cand) / len;
        }
      const Label old = y[static_cast<std::size_t>(t)];
      y[static_cast<std::size_t>(t)] = draw(probs, rng);
      for (auto& g : model.globals) g.commit(inst, y, t, old);
    }
    if (proposals) {
      // Independence move: propose from the factored chain, accept with the
      // change in the global terms.
      proposals->draw_into(proposal, rng);
      double log_ratio = 0.0;
      for (std::size_t g = 0; g < next.size(); ++g) {
        next[g].reset(inst, proposal);
        log_ratio += next[g].weight() * (next[g].value() - model.globals[g].value());
      }
      if (log_ratio >= 0.0 || std::uniform_real_distribution<double>(0.0, 1.0)(rng) < std::exp(log_ratio)) {
        y.swap(proposal);
        model.globals.swap(next);
      }
    }
    if (!retain) continue;

    ++est.sample_count;
    for (int t = 0; t < len; ++t) {
      est.marginals.node(t, y[static_cast<std::size_t>(t)]) += 1.0;
      if (t + 1 < len) est.marginals.edge(t)(y[static_cast<std::size_t>(t)], y[static_cast<std::size_t>(t + 1)]) += 1.0;
    }
    double aux_score = 0.0;
    std::size_t g = 0;
    for (std::size_t s = 0; s < entries.size(); ++s) {
      const auto& f = set.spec_of(entries[s]).feature;
      if (g < model.global_slots.size() && model.global_slots[g] == s)
        values[s] = smoothed[g++];
      else
        values[s] = evaluate_constraint(f, inst, y, true);
      sum[s] += values[s];
      sumsq[s] += values[s] * values[s];
      if (!is_factored(f, true)) aux_score += mu.mu[static_cast<Eigen::Index>(entries[s])] * values[s];
    }
    est.expected_score += assignment_score(model.pot, std::span<const Label>(y)) + aux_score;
  }

  const double n = est.sample_count;
  est.marginals.node /= n;
  est.marginals.edges /= n;
  est.expected_score /= n;
  est.constraint_expectations.resize(entries.size());
  est.standard_errors.resize(entries.size());
  for (std::size_t s = 0; s < entries.size(); ++s) {
    const double mean = sum[s] / n;
    const double var = std::max(0.0, sumsq[s] / n - mean * mean);
    est.constraint_expectations[s] = mean;
    est.standard_errors[s] = std::sqrt(var / n);
  }
  est.expected_features = expected_model_features(est.marginals, inst, lambda.shape);
  return est;
}

double estimate_log_partition_ratio(const ParamVector& lambda, const AuxParams& mu, const ConstraintSet& set,
                                    std::size_t j, const SequenceInstance& inst, const SamplerConfig& sampler) {
  sampler.validate();
  const ChainPotentials pot = model_potentials(lambda, inst);
  check_finite(pot);
  ChainSampler chain(pot);

  const std::vector<std::size_t> no_entries;
  const auto& entries = j < set.by_instance.size() ? set.by_instance[j] : no_entries;
  std::mt19937_64 rng((sampler.seed ^ static_cast<std::uint64_t>(j)) + 0x9e3779b97f4a7c15ULL);
  const int n = sampler.retained();
  Eigen::VectorXd logw(n);
  LabelSequence y;
  for (int s = 0; s < n; ++s) {
    chain.draw_into(y, rng);
    double w = 0.0;
    for (std::size_t e : entries)
      w += mu.mu[static_cast<Eigen::Index>(e)] * evaluate_constraint(set.spec_of(e).feature, inst, y, true);
    logw[s] = w;
  }
  return log_sum_exp(logw) - std::log(static_cast<double>(n));
}

}  // namespace altproj
