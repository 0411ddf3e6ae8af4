#include "altproj/evaluate.hpp"

#include <ostream>

#include "altproj/dataset.hpp"
#include "altproj/model.hpp"

namespace altproj {

ExperimentReport score_predictions(std::span<const LabelSequence> gold, std::span<const LabelSequence> predicted,
                                   const LabelSpace& labels) {
  if (gold.size() != predicted.size()) throw ContractError("need one prediction per gold sequence");
  const auto k = static_cast<std::size_t>(labels.size());
  ExperimentReport r;
  r.label_names = labels.names();
  r.per_label.resize(k);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].size() != predicted[i].size()) throw ContractError("prediction length differs from gold");
    for (std::size_t t = 0; t < gold[i].size(); ++t) {
      const Label g = gold[i][t];
      const Label p = predicted[i][t];
      if (g < 0 || static_cast<std::size_t>(g) >= k || p < 0 || static_cast<std::size_t>(p) >= k)
        throw IndexError("label outside the label space");
      ++r.per_label[static_cast<std::size_t>(g)].gold;
      ++r.per_label[static_cast<std::size_t>(p)].predicted;
      if (g == p) {
        ++r.per_label[static_cast<std::size_t>(g)].correct;
        ++correct;
      }
      ++r.units;
    }
  }
  r.accuracy = r.units ? static_cast<double>(correct) / static_cast<double>(r.units) : 0.0;
  double sum_f1 = 0.0;
  for (auto& s : r.per_label) {
    s.degenerate = s.gold == 0 && s.predicted == 0;
    s.precision = s.predicted ? static_cast<double>(s.correct) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.gold ? static_cast<double>(s.correct) / static_cast<double>(s.gold) : 0.0;
    s.f1 = (s.precision + s.recall > 0) ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    sum_f1 += s.f1;
  }
  r.macro_f1 = k ? sum_f1 / static_cast<double>(k) : 0.0;
  return r;
}

std::vector<LabelSequence> decode_all(const ParamVector& model, std::span<const SequenceInstance> data) {
  std::vector<LabelSequence> out;
  out.reserve(data.size());
  for (const auto& inst : data) {
    validate_instance(inst, model.shape);
    out.push_back(viterbi_decode(model_potentials(model, inst)));
  }
  return out;
}

ExperimentReport evaluate(const ParamVector& model, std::span<const SequenceInstance> test, const LabelSpace& labels) {
  if (labels.size() != model.shape.num_labels) throw ContractError("label space does not match the model");
  std::vector<LabelSequence> gold;
  gold.reserve(test.size());
  for (const auto& inst : test) {
    if (!inst.gold) throw ContractError("evaluation data must be labeled");
    gold.push_back(*inst.gold);
  }
  const auto predicted = decode_all(model, test);
  return score_predictions(gold, predicted, labels);
}

void write_report(std::ostream& out, const ExperimentReport& report) {
  out << "units\t" << report.units << '\n';
  out << "accuracy\t" << format_number(report.accuracy) << '\n';
  out << "macro_f1\t" << format_number(report.macro_f1) << '\n';
  for (std::size_t y = 0; y < report.per_label.size(); ++y) {
    const auto& s = report.per_label[y];
    const std::string& name = report.label_names[y];
    out << "label." << name << ".precision\t" << format_number(s.precision) << '\n';
    out << "label." << name << ".recall\t" << format_number(s.recall) << '\n';
    out << "label." << name << ".f1\t" << format_number(s.f1) << '\n';
    out << "label." << name << ".gold\t" << s.gold << '\n';
    out << "label." << name << ".predicted\t" << s.predicted << '\n';
    if (s.degenerate) out << "label." << name << ".degenerate\t1\n";
  }
}

}  // namespace altproj
