#include "altproj/synth.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace altproj {

void SynthSpec::validate() const {
  if (num_labels < 2) throw ConfigError("synth needs at least two labels");
  const auto prob = [](double p) { return p >= 0 && p <= 1; };
  if (task == TaskKind::Classification) {
    if (num_triggers < 0 || informative_per_label < 0 || noise_words < 0) throw ConfigError("negative word count");
    if (!prob(trigger_in) || !prob(trigger_out) || !prob(informative_in) || !prob(informative_out) || !prob(noise_rate))
      throw ConfigError("word rates must be probabilities");
    if (num_triggers > 0 && trigger_in + (num_labels - 1) * trigger_out <= 0)
      throw ConfigError("trigger rates are all zero");
    return;
  }
  if (min_length < 1 || max_length < min_length) throw ConfigError("bad sequence length range");
  if (!prob(self_transition)) throw ConfigError("self-transition rate must be a probability");
  if (triggers_per_label < 1 || content_per_label < 1 || shared_words < 1) throw ConfigError("word counts must be positive");
  if (!prob(token_trigger) || !prob(token_content) || !prob(token_trigger_leak) ||
      token_trigger + token_content + token_trigger_leak > 1)
    throw ConfigError("token word probabilities must sum to at most 1");
  if (min_segment < 1 || max_segment < min_segment) throw ConfigError("bad segment length range");
  if (min_segments < 1 || min_segments > num_labels) throw ConfigError("bad segment count");
}

namespace {

class Generator {
 public:
  Generator(const SynthSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

  SynthData run() {
    SynthData out;
    Dataset base;
    base.kind = spec_.task;
    const int k = spec_.num_labels;
    for (int y = 0; y < k; ++y) base.labels.intern((spec_.task == TaskKind::Classification ? "c" : "s") + std::to_string(y));
    if (spec_.task == TaskKind::Classification)
      build_classification_vocabulary(base, out);
    else
      build_chain_vocabulary(base, out);

    out.labeled = base;
    out.unlabeled = base;
    out.test = base;
    for (std::size_t i = 0; i < spec_.labeled; ++i) out.labeled.add(draw(true));
    for (std::size_t i = 0; i < spec_.unlabeled; ++i) out.unlabeled.add(draw(false));
    for (std::size_t i = 0; i < spec_.test; ++i) out.test.add(draw(true));
    return out;
  }

 private:
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  void build_classification_vocabulary(Dataset& base, SynthData& out) {
    const int k = spec_.num_labels;
    const double target = spec_.trigger_in / (spec_.trigger_in + (k - 1) * spec_.trigger_out);
    for (int i = 0; i < spec_.num_triggers; ++i) {
      const std::size_t id = base.vocabulary.intern("trig" + std::to_string(i));
      const Label y = i % k;
      rates_.push_back(rate_row(y, spec_.trigger_in, spec_.trigger_out));
      out.triggers.push_back(id);
      ConstraintSpec c;
      c.feature = word_label(id, y);
      c.target = target;
      out.constraints.push_back(c);
    }
    for (int y = 0; y < k; ++y)
      for (int i = 0; i < spec_.informative_per_label; ++i) {
        base.vocabulary.intern("w" + std::to_string(y) + "_" + std::to_string(i));
        rates_.push_back(rate_row(y, spec_.informative_in, spec_.informative_out));
      }
    for (int i = 0; i < spec_.noise_words; ++i) {
      base.vocabulary.intern("noise" + std::to_string(i));
      rates_.push_back(Eigen::VectorXd::Constant(k, spec_.noise_rate));
    }
  }

  Eigen::VectorXd rate_row(Label y, double in, double out) const {
    Eigen::VectorXd r = Eigen::VectorXd::Constant(spec_.num_labels, out);
    r[y] = in;
    return r;
  }

  void build_chain_vocabulary(Dataset& base, SynthData& out) {
    const int k = spec_.num_labels;
    const int tpl = spec_.triggers_per_label;
    // A leaked token picks any trigger uniformly, its own label's included.
    const double own = spec_.token_trigger / tpl + spec_.token_trigger_leak / (k * tpl);
    const double other = spec_.token_trigger_leak / (k * tpl);
    const double target = own / (own + (k - 1) * other);
    for (int y = 0; y < k; ++y)
      for (int i = 0; i < tpl; ++i) {
        const std::size_t id = base.vocabulary.intern("trig" + std::to_string(y) + "_" + std::to_string(i));
        out.triggers.push_back(id);
        ConstraintSpec c;
        c.feature = token_label(id, y);
        c.target = target;
        out.constraints.push_back(c);
      }
    for (int y = 0; y < k; ++y)
      for (int i = 0; i < spec_.content_per_label; ++i)
        base.vocabulary.intern("w" + std::to_string(y) + "_" + std::to_string(i));
    for (int i = 0; i < spec_.shared_words; ++i) base.vocabulary.intern("shared" + std::to_string(i));

    if (spec_.style == ChainStyle::Markov) {
      ConstraintSpec c;
      c.feature = self_transition();
      c.target = spec_.self_transition;
      out.constraints.push_back(c);
    } else {
      // Every label occurs in at most one segment.
      ConstraintSpec c;
      c.feature = repetition_count();
      c.mode = TargetMode::AbsoluteCount;
      c.target = 0.0;
      c.penalty.kind = PenaltyKind::Affine;
      out.constraints.push_back(c);
    }
  }

  SequenceInstance draw(bool keep_gold) {
    SequenceInstance inst;
    LabelSequence y;
    if (spec_.task == TaskKind::Classification) {
      y.push_back(pick(spec_.num_labels));
      std::vector<FeatureValue> words;
      for (std::size_t w = 0; w < rates_.size(); ++w)
        if (uniform() < rates_[w][y[0]]) words.push_back({w, 1.0});
      inst.positions.emplace_back(std::move(words));
    } else {
      y = spec_.style == ChainStyle::Markov ? markov_labels() : segment_labels();
      for (Label label : y) inst.positions.emplace_back(std::vector<FeatureValue>{{emit(label), 1.0}});
    }
    if (keep_gold) inst.gold = std::move(y);
    return inst;
  }

  LabelSequence markov_labels() {
    const int k = spec_.num_labels;
    const int length = spec_.min_length + pick(spec_.max_length - spec_.min_length + 1);
    LabelSequence y{pick(k)};
    while (static_cast<int>(y.size()) < length) {
      const Label prev = y.back();
      if (uniform() < spec_.self_transition) {
        y.push_back(prev);
      } else {
        const Label jump = pick(k - 1);
        y.push_back(jump >= prev ? jump + 1 : jump);
      }
    }
    return y;
  }

  LabelSequence segment_labels() {
    const int k = spec_.num_labels;
    std::vector<Label> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    const int segments = spec_.min_segments + pick(k - spec_.min_segments + 1);
    LabelSequence y;
    for (int s = 0; s < segments; ++s) {
      const int len = spec_.min_segment + pick(spec_.max_segment - spec_.min_segment + 1);
      y.insert(y.end(), static_cast<std::size_t>(len), order[static_cast<std::size_t>(s)]);
    }
    return y;
  }

  std::size_t emit(Label y) {
    const int k = spec_.num_labels;
    const int tpl = spec_.triggers_per_label;
    const auto trigger_id = [&](Label label, int i) { return static_cast<std::size_t>(label * tpl + i); };
    const std::size_t content_base = static_cast<std::size_t>(k * tpl);
    const std::size_t shared_base = content_base + static_cast<std::size_t>(k * spec_.content_per_label);
    double u = uniform();
    if (u < spec_.token_trigger) return trigger_id(y, pick(tpl));
    u -= spec_.token_trigger;
    if (u < spec_.token_trigger_leak) return trigger_id(pick(k), pick(tpl));
    u -= spec_.token_trigger_leak;
    if (u < spec_.token_content)
      return content_base + static_cast<std::size_t>(y * spec_.content_per_label + pick(spec_.content_per_label));
    return shared_base + static_cast<std::size_t>(pick(spec_.shared_words));
  }

  const SynthSpec& spec_;
  std::mt19937_64 rng_;
  std::vector<Eigen::VectorXd> rates_;  // classification word rates per label
};

}  // namespace

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  return Generator(spec, seed).run();
}

std::vector<SequenceInstance> restrict_features(std::span<const SequenceInstance> data,
                                                std::span<const std::size_t> keep) {
  std::vector<std::size_t> sorted(keep.begin(), keep.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<SequenceInstance> out;
  out.reserve(data.size());
  for (const auto& inst : data) {
    SequenceInstance copy;
    copy.gold = inst.gold;
    for (const auto& pos : inst.positions) {
      std::vector<FeatureValue> kept;
      for (const auto& fv : pos)
        if (std::binary_search(sorted.begin(), sorted.end(), fv.id)) kept.push_back(fv);
      copy.positions.emplace_back(std::move(kept));
    }
    out.push_back(std::move(copy));
  }
  return out;
}

}  // namespace altproj
