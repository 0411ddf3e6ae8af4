#ifndef ALTPROJ_INFERENCE_HPP
#define ALTPROJ_INFERENCE_HPP

// Exact inference kernels for linear chains, written against plain potential
// tables so the model, auxiliary and oracle code paths all share them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "altproj/error.hpp"
#include "altproj/types.hpp"

namespace altproj {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Log-potentials of a chain: node(t, y) and edge(t)(a, b) for y_t = a,
/// y_{t+1} = b. The L-1 edge tables sit side by side in one K x K(L-1) matrix.
template <typename Scalar>
struct BasicChainPotentials {
  MatrixX<Scalar> node;
  MatrixX<Scalar> edges;

  BasicChainPotentials() = default;
  BasicChainPotentials(int length, int labels)
      : node(MatrixX<Scalar>::Zero(length, labels)),
        edges(MatrixX<Scalar>::Zero(labels, labels * (length > 0 ? length - 1 : 0))) {}

  int length() const { return static_cast<int>(node.rows()); }
  int labels() const { return static_cast<int>(node.cols()); }
  int num_edges() const { return length() > 0 ? length() - 1 : 0; }
  auto edge(int t) { return edges.middleCols(t * labels(), labels()); }
  auto edge(int t) const { return edges.middleCols(t * labels(), labels()); }
};

/// Marginals of a chain distribution plus its log-partition value, laid out
/// like BasicChainPotentials. For flat classification `node` has one row and
/// there are no edges.
template <typename Scalar>
struct BasicPosterior {
  MatrixX<Scalar> node;
  MatrixX<Scalar> edges;
  Scalar log_z = Scalar(0);

  int length() const { return static_cast<int>(node.rows()); }
  int labels() const { return static_cast<int>(node.cols()); }
  int num_edges() const { return static_cast<int>(edges.cols()) / std::max(1, labels()); }
  auto edge(int t) { return edges.middleCols(t * labels(), labels()); }
  auto edge(int t) const { return edges.middleCols(t * labels(), labels()); }
};

using ChainPotentials = BasicChainPotentials<double>;
using Posterior = BasicPosterior<double>;

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.derived().array() - m).exp().sum());
}

template <typename Scalar>
void check_finite(const BasicChainPotentials<Scalar>& pot) {
  if (!pot.node.allFinite()) throw NumericError("non-finite node potential");
  if (!pot.edges.allFinite()) throw NumericError("non-finite edge potential");
}

/// Forward-backward in log space. O(L K^2).
template <typename Scalar>
BasicPosterior<Scalar> forward_backward(const BasicChainPotentials<Scalar>& pot) {
  using std::exp;
  using std::log;
  check_finite(pot);
  const int len = pot.length();
  const int k = pot.labels();
  if (len < 1) throw ContractError("chain of length zero");

  // Column-major tables, so alpha.col(t) is contiguous.
  MatrixX<Scalar> alpha(k, len);
  MatrixX<Scalar> beta(k, len);
  std::vector<Scalar> work(static_cast<std::size_t>(k));
  alpha.col(0) = pot.node.row(0).transpose();
  for (int t = 1; t < len; ++t) {
    const Scalar* prev = alpha.col(t - 1).data();
    const Scalar* e = pot.edges.data() + static_cast<Eigen::Index>(t - 1) * k * k;
    for (int b = 0; b < k; ++b) {
      const Scalar* eb = e + static_cast<Eigen::Index>(b) * k;  // edge(t-1).col(b)
      Scalar m = prev[0] + eb[0];
      for (int a = 0; a < k; ++a) {
        work[static_cast<std::size_t>(a)] = prev[a] + eb[a];
        if (work[static_cast<std::size_t>(a)] > m) m = work[static_cast<std::size_t>(a)];
      }
      Scalar sum = 0;
      for (int a = 0; a < k; ++a) sum += exp(work[static_cast<std::size_t>(a)] - m);
      alpha(b, t) = pot.node(t, b) + m + log(sum);
    }
  }
  beta.col(len - 1).setZero();
  VectorX<Scalar> next(k);
  for (int t = len - 2; t >= 0; --t) {
    next = pot.node.row(t + 1).transpose() + beta.col(t + 1);
    const Scalar* e = pot.edges.data() + static_cast<Eigen::Index>(t) * k * k;
    for (int a = 0; a < k; ++a) {
      Scalar m = e[a] + next[0];
      for (int b = 0; b < k; ++b) {
        work[static_cast<std::size_t>(b)] = e[a + static_cast<Eigen::Index>(b) * k] + next[b];
        if (work[static_cast<std::size_t>(b)] > m) m = work[static_cast<std::size_t>(b)];
      }
      Scalar sum = 0;
      for (int b = 0; b < k; ++b) sum += exp(work[static_cast<std::size_t>(b)] - m);
      beta(a, t) = m + log(sum);
    }
  }

  BasicPosterior<Scalar> post;
  post.log_z = log_sum_exp(alpha.col(len - 1));
  if (!std::isfinite(post.log_z)) throw NumericError("non-finite log-partition");
  post.node = ((alpha + beta).array() - post.log_z).exp().matrix().transpose();
  post.edges.resize(k, static_cast<Eigen::Index>(k) * (len - 1));
  for (int t = 0; t + 1 < len; ++t) {
    const Scalar* e = pot.edges.data() + static_cast<Eigen::Index>(t) * k * k;
    Scalar* out = post.edges.data() + static_cast<Eigen::Index>(t) * k * k;
    for (int b = 0; b < k; ++b) {
      const Scalar right = pot.node(t + 1, b) + beta(b, t + 1) - post.log_z;
      for (int a = 0; a < k; ++a) {
        const Eigen::Index i = a + static_cast<Eigen::Index>(b) * k;
        out[i] = exp(alpha(a, t) + e[i] + right);
      }
    }
  }
  return post;
}

/// Max-product decoding. Ties go to the lower label index, both for the final
/// label and for each back-pointer.
template <typename Scalar>
LabelSequence viterbi_decode(const BasicChainPotentials<Scalar>& pot) {
  check_finite(pot);
  const int len = pot.length();
  const int k = pot.labels();
  if (len < 1) throw ContractError("chain of length zero");

  MatrixX<Scalar> delta(len, k);
  Eigen::MatrixXi back(len, k);
  delta.row(0) = pot.node.row(0);
  for (int t = 1; t < len; ++t) {
    const auto e = pot.edge(t - 1);
    for (int b = 0; b < k; ++b) {
      int best = 0;
      Scalar best_score = delta(t - 1, 0) + e(0, b);
      for (int a = 1; a < k; ++a) {
        const Scalar s = delta(t - 1, a) + e(a, b);
        if (s > best_score) {
          best_score = s;
          best = a;
        }
      }
      delta(t, b) = best_score + pot.node(t, b);
      back(t, b) = best;
    }
  }
  LabelSequence y(static_cast<std::size_t>(len));
  int best = 0;
  for (int b = 1; b < k; ++b)
    if (delta(len - 1, b) > delta(len - 1, best)) best = b;
  y[static_cast<std::size_t>(len - 1)] = best;
  for (int t = len - 1; t > 0; --t) y[static_cast<std::size_t>(t - 1)] = back(t, y[static_cast<std::size_t>(t)]);
  return y;
}

/// Total log-potential of one complete assignment.
template <typename Scalar>
Scalar assignment_score(const BasicChainPotentials<Scalar>& pot, std::span<const Label> y) {
  Scalar s = pot.node(0, y[0]);
  for (int t = 1; t < pot.length(); ++t)
    s += pot.edge(t - 1)(y[static_cast<std::size_t>(t - 1)], y[static_cast<std::size_t>(t)]) +
         pot.node(t, y[static_cast<std::size_t>(t)]);
  return s;
}

inline constexpr double kEnumerationLimit = 1e6;

/// Calls fn(y) for every y in {0..K-1}^L in lexicographic order. Refuses with
/// GuardError when K^L exceeds `limit`.
template <typename Fn>
void for_each_assignment(int length, int labels, Fn&& fn, double limit = kEnumerationLimit) {
  if (std::pow(static_cast<double>(labels), static_cast<double>(length)) > limit)
    throw GuardError("state space K^L exceeds the enumeration limit");
  LabelSequence y(static_cast<std::size_t>(length), 0);
  while (true) {
    fn(std::as_const(y));
    int pos = length - 1;
    while (pos >= 0 && ++y[static_cast<std::size_t>(pos)] == labels) {
      y[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
}

/// Exact posterior by enumerating every assignment. Testing oracle for
/// forward_backward; independent of the recursions above.
template <typename Scalar>
BasicPosterior<Scalar> enumerate_posterior(const BasicChainPotentials<Scalar>& pot) {
  check_finite(pot);
  const int len = pot.length();
  const int k = pot.labels();
  std::vector<Scalar> scores;
  for_each_assignment(len, k, [&](const LabelSequence& y) { scores.push_back(assignment_score(pot, std::span<const Label>(y))); });
  const Eigen::Map<const VectorX<Scalar>> sv(scores.data(), static_cast<Eigen::Index>(scores.size()));
  BasicPosterior<Scalar> post;
  post.log_z = log_sum_exp(sv);
  post.node = MatrixX<Scalar>::Zero(len, k);
  post.edges = MatrixX<Scalar>::Zero(k, static_cast<Eigen::Index>(k) * (len - 1));
  std::size_t i = 0;
  for_each_assignment(len, k, [&](const LabelSequence& y) {
    const Scalar p = std::exp(scores[i++] - post.log_z);
    for (int t = 0; t < len; ++t) post.node(t, y[static_cast<std::size_t>(t)]) += p;
    for (int t = 0; t + 1 < len; ++t)
      post.edge(t)(y[static_cast<std::size_t>(t)], y[static_cast<std::size_t>(t + 1)]) += p;
  });
  return post;
}

}  // namespace altproj

#endif  // ALTPROJ_INFERENCE_HPP
