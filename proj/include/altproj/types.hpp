#ifndef ALTPROJ_TYPES_HPP
#define ALTPROJ_TYPES_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "altproj/error.hpp"

namespace altproj {

using Label = int;
using LabelSequence = std::vector<Label>;

/// Dense string <-> id table. Ids are handed out in first-seen order.
class Interner {
 public:
  std::size_t intern(std::string_view name);
  std::optional<std::size_t> find(std::string_view name) const;
  const std::string& name(std::size_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Ordered set of output labels, indexed 0..K-1. K must be at least 2.
class LabelSpace {
 public:
  explicit LabelSpace(std::vector<std::string> names);
  /// Anonymous labels "0".."K-1"; handy for synthetic problems.
  static LabelSpace anonymous(int k);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(Label y) const { return names_.at(static_cast<std::size_t>(y)); }
  std::optional<Label> find(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const LabelSpace& a, const LabelSpace& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, Label> ids_;
};

struct FeatureValue {
  std::size_t id = 0;
  double value = 0.0;

  friend bool operator==(const FeatureValue&, const FeatureValue&) = default;
};

/// Sparse vector with strictly increasing ids and finite values.
class SparseFeatures {
 public:
  SparseFeatures() = default;
  /// Validates the invariant; throws ContractError when ids are unsorted,
  /// duplicated or a value is not finite.
  explicit SparseFeatures(std::vector<FeatureValue> entries);
  /// Sorts and sums duplicate ids.
  static SparseFeatures from_unsorted(std::vector<FeatureValue> entries);

  std::span<const FeatureValue> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  /// Value stored for `id`, or 0.
  double value(std::size_t id) const;
  bool contains(std::size_t id) const;

  friend bool operator==(const SparseFeatures&, const SparseFeatures&) = default;

 private:
  std::vector<FeatureValue> entries_;
};

/// A flat classification example; `gold` is empty for unlabeled data.
struct Instance {
  SparseFeatures features;
  std::optional<Label> gold;
};

/// A label sequence example. A classification Instance is handled internally
/// as a sequence of length one.
struct SequenceInstance {
  std::vector<SparseFeatures> positions;
  std::optional<LabelSequence> gold;

  int length() const { return static_cast<int>(positions.size()); }
  bool labeled() const { return gold.has_value(); }
};

SequenceInstance as_sequence(const Instance& inst);

/// Layout of the model parameter vector. Input feature f conjoined with label
/// y lives at f*K + y; for chains the K*K transition block follows, with the
/// pair (a -> b) at V*K + a*K + b.
struct ModelShape {
  std::size_t num_inputs = 0;
  int num_labels = 2;
  bool chain = false;

  std::size_t node_index(std::size_t feature, Label y) const {
    return feature * static_cast<std::size_t>(num_labels) + static_cast<std::size_t>(y);
  }
  std::size_t transition_offset() const { return num_inputs * static_cast<std::size_t>(num_labels); }
  std::size_t transition_index(Label from, Label to) const {
    return transition_offset() + static_cast<std::size_t>(from * num_labels + to);
  }
  std::size_t dim() const {
    const auto k = static_cast<std::size_t>(num_labels);
    return num_inputs * k + (chain ? k * k : 0);
  }

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Model parameters lambda together with the layout they index.
struct ParamVector {
  ModelShape shape;
  Eigen::VectorXd weights;

  ParamVector() = default;
  explicit ParamVector(const ModelShape& s) : shape(s), weights(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.dim()))) {}
  ParamVector(const ModelShape& s, Eigen::VectorXd w);
};

/// Throws ContractError unless every label is in [0, K) and lengths agree.
void validate_instance(const SequenceInstance& inst, const ModelShape& shape);

}  // namespace altproj

#endif  // ALTPROJ_TYPES_HPP
