#include "altproj/types.hpp"

#include <algorithm>
#include <cmath>

namespace altproj {

std::size_t Interner::intern(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  const std::size_t id = names_.size();
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::size_t> Interner::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() < 2) throw ContractError("label space needs at least two labels");
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (!ids_.emplace(names_[i], static_cast<Label>(i)).second)
      throw ContractError("duplicate label name '" + names_[i] + "'");
}

LabelSpace LabelSpace::anonymous(int k) {
  std::vector<std::string> names;
  for (int i = 0; i < k; ++i) names.push_back(std::to_string(i));
  return LabelSpace(std::move(names));
}

std::optional<Label> LabelSpace::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

SparseFeatures::SparseFeatures(std::vector<FeatureValue> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!std::isfinite(entries_[i].value)) throw ContractError("non-finite feature value");
    if (i > 0 && entries_[i].id <= entries_[i - 1].id) throw ContractError("feature ids must be strictly increasing");
  }
}

SparseFeatures SparseFeatures::from_unsorted(std::vector<FeatureValue> entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<FeatureValue> merged;
  for (const auto& e : entries) {
    if (!merged.empty() && merged.back().id == e.id)
      merged.back().value += e.value;
    else
      merged.push_back(e);
  }
  return SparseFeatures(std::move(merged));
}

double SparseFeatures::value(std::size_t id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id, [](const auto& e, std::size_t v) { return e.id < v; });
  return (it != entries_.end() && it->id == id) ? it->value : 0.0;
}

bool SparseFeatures::contains(std::size_t id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id, [](const auto& e, std::size_t v) { return e.id < v; });
  return it != entries_.end() && it->id == id;
}

SequenceInstance as_sequence(const Instance& inst) {
  SequenceInstance s;
  s.positions.push_back(inst.features);
  if (inst.gold) s.gold = LabelSequence{*inst.gold};
  return s;
}

ParamVector::ParamVector(const ModelShape& s, Eigen::VectorXd w) : shape(s), weights(std::move(w)) {
  if (static_cast<std::size_t>(weights.size()) != shape.dim())
    throw ContractError("parameter vector size does not match the model shape");
}

void validate_instance(const SequenceInstance& inst, const ModelShape& shape) {
  if (inst.positions.empty()) throw ContractError("instance has no positions");
  if (!shape.chain && inst.positions.size() != 1) throw ContractError("classification instance must have one position");
  for (const auto& pos : inst.positions)
    if (!pos.empty() && pos.entries().back().id >= shape.num_inputs)
      throw IndexError("feature id " + std::to_string(pos.entries().back().id) + " out of range");
  if (inst.gold) {
    if (inst.gold->size() != inst.positions.size()) throw ContractError("gold label count differs from length");
    for (Label y : *inst.gold)
      if (y < 0 || y >= shape.num_labels) throw IndexError("gold label out of range");
  }
}

}  // namespace altproj
