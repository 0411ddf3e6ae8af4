#ifndef ALTPROJ_SYNTH_HPP
#define ALTPROJ_SYNTH_HPP

// Synthetic generators with known ground truth, and the constraints whose
// targets are the generator's true expectations.

#include <cstdint>
#include <string>
#include <vector>

#include "altproj/constraints.hpp"
#include "altproj/dataset.hpp"

namespace altproj {

enum class ChainStyle {
  // Markov labels: stay with probability self_transition, else jump to a
  // uniformly chosen different label.
  Markov,
  // Each sequence visits a random subset of labels in random order, one
  // contiguous segment per label.
  Segments,
};

struct SynthSpec {
  TaskKind task = TaskKind::Classification;
  int num_labels = 6;
  std::size_t labeled = 0;
  std::size_t unlabeled = 2000;
  std::size_t test = 1000;

  // Classification: binary bag of words; each word w is present with
  // probability rate(w, y) independently. Triggers are split round-robin
  // over the labels.
  int num_triggers = 50;
  double trigger_in = 0.12;
  double trigger_out = 0.01;
  int informative_per_label = 20;
  double informative_in = 0.15;
  double informative_out = 0.03;
  int noise_words = 200;
  double noise_rate = 0.05;

  // Chains: one word per token. With probability token_trigger the word is
  // one of the label's triggers, with probability token_trigger_leak any
  // trigger, with probability token_content one of the label's content
  // words, otherwise a word shared by all labels.
  ChainStyle style = ChainStyle::Markov;
  int min_length = 8;
  int max_length = 20;
  double self_transition = 0.9;
  int triggers_per_label = 3;
  int content_per_label = 10;
  int shared_words = 30;
  double token_trigger = 0.15;
  double token_trigger_leak = 0.02;
  double token_content = 0.35;
  // Segments: segment lengths are uniform in [min_segment, max_segment] and
  // a sequence visits between min_segments and num_labels labels.
  int min_segment = 1;
  int max_segment = 5;
  int min_segments = 2;

  void validate() const;
};

struct SynthData {
  // Three datasets sharing one vocabulary and label table.
  Dataset labeled;
  Dataset unlabeled;
  Dataset test;
  std::vector<ConstraintSpec> constraints;
  // Trigger vocabulary ids (classification: word triggers; chains: token triggers).
  std::vector<std::size_t> triggers;
};

SynthData synth_generate(const SynthSpec& spec, std::uint64_t seed);

/// Copies of `data` restricted to the listed feature ids (the vocabulary is
/// kept, other features are removed from every instance).
std::vector<SequenceInstance> restrict_features(std::span<const SequenceInstance> data,
                                                std::span<const std::size_t> keep);

}  // namespace altproj

#endif  // ALTPROJ_SYNTH_HPP
