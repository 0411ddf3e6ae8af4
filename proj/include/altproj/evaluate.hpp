#ifndef ALTPROJ_EVALUATE_HPP
#define ALTPROJ_EVALUATE_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "altproj/types.hpp"

namespace altproj {

struct LabelScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;
  // No gold and no predicted occurrences; F1 is reported as 0.
  bool degenerate = false;
};

struct ExperimentReport {
  // Token accuracy for chains, instance accuracy for classification.
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t units = 0;
  std::vector<std::string> label_names;
  std::vector<LabelScore> per_label;
};

/// Scores predictions against gold labels, position by position. Undefined
/// precision or recall counts as 0.
ExperimentReport score_predictions(std::span<const LabelSequence> gold, std::span<const LabelSequence> predicted,
                                   const LabelSpace& labels);

/// Decodes every instance (argmax or Viterbi) and scores it. Every instance
/// must be labeled.
ExperimentReport evaluate(const ParamVector& model, std::span<const SequenceInstance> test, const LabelSpace& labels);

std::vector<LabelSequence> decode_all(const ParamVector& model, std::span<const SequenceInstance> data);

/// key<TAB>value lines, fixed order, numbers at full precision.
void write_report(std::ostream& out, const ExperimentReport& report);

}  // namespace altproj

#endif  // ALTPROJ_EVALUATE_HPP
