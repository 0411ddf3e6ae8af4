#include "altproj/model.hpp"

#include <cmath>
#include <string>

namespace altproj {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_labels(const ParamVector& params, const LabelSpace& labels) {
  if (labels.size() != params.shape.num_labels) throw ContractError("label space size differs from the model");
}

Eigen::Map<const RowMajorMatrix> transition_block(const ParamVector& params) {
  const auto k = params.shape.num_labels;
  return {params.weights.data() + params.shape.transition_offset(), k, k};
}

}  // namespace

ChainPotentials model_potentials(const ParamVector& params, const SequenceInstance& inst) {
  const ModelShape& shape = params.shape;
  const int len = inst.length();
  const int k = shape.num_labels;
  if (len < 1) throw ContractError("instance has no positions");
  if (!shape.chain && len != 1) throw ContractError("classification model applied to a sequence");

  ChainPotentials pot(len, k);
  for (int t = 0; t < len; ++t) {
    for (const auto& [id, value] : inst.positions[static_cast<std::size_t>(t)]) {
      if (id >= shape.num_inputs) throw IndexError("feature id " + std::to_string(id) + " out of range");
      pot.node.row(t) += value * params.weights.segment(static_cast<Eigen::Index>(shape.node_index(id, 0)), k).transpose();
    }
  }
  if (shape.chain && len > 1) {
    const auto trans = transition_block(params);
    for (int t = 0; t < pot.num_edges(); ++t) pot.edge(t) = trans;
  }
  return pot;
}

Posterior model_posterior(const ParamVector& params, const SequenceInstance& inst) {
  return forward_backward(model_potentials(params, inst));
}

Posterior classify_posterior(const ParamVector& params, const Instance& inst, const LabelSpace& labels) {
  check_labels(params, labels);
  SequenceInstance s;
  s.positions.push_back(inst.features);
  const ChainPotentials pot = model_potentials(params, s);
  // Softmax with max-subtraction; the single-row case of forward_backward.
  check_finite(pot);
  Posterior post;
  const Eigen::RowVectorXd scores = pot.node.row(0);
  post.log_z = log_sum_exp(scores);
  post.node = (scores.array() - post.log_z).exp().matrix();
  return post;
}

Posterior chain_posterior(const ParamVector& params, const SequenceInstance& inst, const LabelSpace& labels) {
  check_labels(params, labels);
  return forward_backward(model_potentials(params, inst));
}

LabelSequence viterbi(const ParamVector& params, const SequenceInstance& inst, const LabelSpace& labels) {
  check_labels(params, labels);
  return viterbi_decode(model_potentials(params, inst));
}

Posterior brute_force_posterior(const ParamVector& params, const SequenceInstance& inst, const LabelSpace& labels) {
  check_labels(params, labels);
  return enumerate_posterior(model_potentials(params, inst));
}

void add_expected_features(const Posterior& post, const SequenceInstance& inst, const ModelShape& shape, double scale,
                           Eigen::VectorXd& out) {
  const int k = shape.num_labels;
  for (int t = 0; t < inst.length(); ++t) {
    for (const auto& [id, value] : inst.positions[static_cast<std::size_t>(t)])
      out.segment(static_cast<Eigen::Index>(shape.node_index(id, 0)), k) += (scale * value) * post.node.row(t).transpose();
  }
  if (shape.chain && post.num_edges() > 0) {
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> trans(
        out.data() + shape.transition_offset(), k, k);
    for (int t = 0; t < post.num_edges(); ++t) trans += scale * post.edge(t);
  }
}

void add_observed_features(const SequenceInstance& inst, std::span<const Label> y, const ModelShape& shape,
                           double scale, Eigen::VectorXd& out) {
  for (int t = 0; t < inst.length(); ++t) {
    const Label yt = y[static_cast<std::size_t>(t)];
    for (const auto& [id, value] : inst.positions[static_cast<std::size_t>(t)])
      out[static_cast<Eigen::Index>(shape.node_index(id, yt))] += scale * value;
    if (shape.chain && t > 0)
      out[static_cast<Eigen::Index>(shape.transition_index(y[static_cast<std::size_t>(t - 1)], yt))] += scale;
  }
}

double score(const ParamVector& params, const SequenceInstance& inst, std::span<const Label> y) {
  return assignment_score(model_potentials(params, inst), y);
}

namespace {

SparseFeatures sparse_expectation(const Posterior& post, const SequenceInstance& inst, const ModelShape& shape) {
  // Touches nnz*K + K^2 model features; from_unsorted merges repeated ids.
  std::vector<FeatureValue> entries;
  const int k = shape.num_labels;
  for (int t = 0; t < inst.length(); ++t)
    for (const auto& [id, value] : inst.positions[static_cast<std::size_t>(t)])
      for (Label y = 0; y < k; ++y) entries.push_back({shape.node_index(id, y), value * post.node(t, y)});
  if (shape.chain)
    for (int t = 0; t < post.num_edges(); ++t)
      for (Label a = 0; a < k; ++a)
        for (Label b = 0; b < k; ++b) entries.push_back({shape.transition_index(a, b), post.edge(t)(a, b)});
  return SparseFeatures::from_unsorted(std::move(entries));
}

}  // namespace

SparseFeatures expected_model_features(const Posterior& post, const Instance& inst, const ModelShape& shape) {
  SequenceInstance s;
  s.positions.push_back(inst.features);
  return sparse_expectation(post, s, shape);
}

SparseFeatures expected_model_features(const Posterior& post, const SequenceInstance& inst, const ModelShape& shape) {
  return sparse_expectation(post, inst, shape);
}

std::pair<double, Eigen::VectorXd> supervised_loss_and_gradient(const ParamVector& params,
                                                                std::span<const SequenceInstance> data, double alpha) {
  if (alpha < 0) throw ContractError("alpha must be non-negative");
  double loss = 0.5 * alpha * params.weights.squaredNorm();
  Eigen::VectorXd grad = alpha * params.weights;
  for (const auto& inst : data) {
    if (!inst.gold) throw ContractError("supervised loss requires labeled instances");
    const ChainPotentials pot = model_potentials(params, inst);
    const Posterior post = forward_backward(pot);
    loss += post.log_z - assignment_score(pot, std::span<const Label>(*inst.gold));
    add_expected_features(post, inst, params.shape, 1.0, grad);
    add_observed_features(inst, *inst.gold, params.shape, -1.0, grad);
  }
  return {loss, std::move(grad)};
}

std::pair<double, Eigen::VectorXd> supervised_loss_and_gradient(const ParamVector& params,
                                                                std::span<const Instance> data, double alpha) {
  std::vector<SequenceInstance> seqs;
  seqs.reserve(data.size());
  for (const auto& inst : data) {
    if (!inst.gold) throw ContractError("supervised loss requires labeled instances");
    seqs.push_back(as_sequence(inst));
  }
  return supervised_loss_and_gradient(params, seqs, alpha);
}

}  // namespace altproj
