#ifndef ALTPROJ_TESTS_SUPPORT_HPP
#define ALTPROJ_TESTS_SUPPORT_HPP

// Test-side oracles. Everything here recomputes quantities from their
// definitions (explicit sums over every labeling, feature vectors built by
// hand) and shares no code with the recursions under test.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "altproj/types.hpp"

namespace support {

using altproj::Label;
using altproj::LabelSequence;
using altproj::ModelShape;
using altproj::ParamVector;
using altproj::SequenceInstance;

template <typename Fn>
void each_labeling(int length, int labels, Fn&& fn) {
  LabelSequence y(static_cast<std::size_t>(length), 0);
  for (;;) {
    fn(std::span<const Label>(y));
    int pos = length - 1;
    while (pos >= 0 && ++y[static_cast<std::size_t>(pos)] == labels) y[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) return;
  }
}

// f(x, y) as a dense vector, straight from the parameter layout.
inline Eigen::VectorXd feature_vector(const SequenceInstance& x, std::span<const Label> y, const ModelShape& shape) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.dim()));
  const int k = shape.num_labels;
  for (std::size_t t = 0; t < y.size(); ++t) {
    for (const auto& fv : x.positions[t]) f[static_cast<Eigen::Index>(fv.id * k + y[t])] += fv.value;
    if (shape.chain && t > 0)
      f[static_cast<Eigen::Index>(shape.num_inputs * k + y[t - 1] * k + y[t])] += 1.0;
  }
  return f;
}

using LogWeight = std::function<double(std::span<const Label>)>;

struct Enumerated {
  double log_z = 0.0;
  Eigen::MatrixXd node;      // L x K
  Eigen::MatrixXd edges;     // K x K(L-1)
  Eigen::VectorXd features;  // E[f(x, y)]
  LabelSequence argmax;
  double max_score = -INFINITY;
};

// Distribution proportional to exp(lambda . f(x, y) + extra(y)).
inline Enumerated enumerate(const ParamVector& lambda, const SequenceInstance& x, const LogWeight& extra = {}) {
  const int len = x.length();
  const int k = lambda.shape.num_labels;
  std::vector<double> scores;
  std::vector<LabelSequence> ys;
  each_labeling(len, k, [&](std::span<const Label> y) {
    double s = lambda.weights.dot(feature_vector(x, y, lambda.shape));
    if (extra) s += extra(y);
    scores.push_back(s);
    ys.emplace_back(y.begin(), y.end());
  });
  Enumerated e;
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  e.log_z = m + std::log(z);
  e.node = Eigen::MatrixXd::Zero(len, k);
  e.edges = Eigen::MatrixXd::Zero(k, k * std::max(0, len - 1));
  e.features = Eigen::VectorXd::Zero(lambda.weights.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double p = std::exp(scores[i] - e.log_z);
    const auto& y = ys[i];
    for (int t = 0; t < len; ++t) e.node(t, y[static_cast<std::size_t>(t)]) += p;
    for (int t = 0; t + 1 < len; ++t) e.edges(y[static_cast<std::size_t>(t)], t * k + y[static_cast<std::size_t>(t + 1)]) += p;
    e.features += p * feature_vector(x, y, lambda.shape);
    if (scores[i] > e.max_score) {
      e.max_score = scores[i];
      e.argmax = y;
    }
  }
  return e;
}

// E[g(y)] under the same distribution.
inline double expect(const ParamVector& lambda, const SequenceInstance& x, const LogWeight& extra,
                     const std::function<double(std::span<const Label>)>& g) {
  const Enumerated e = enumerate(lambda, x, extra);
  double sum = 0.0;
  each_labeling(x.length(), lambda.shape.num_labels, [&](std::span<const Label> y) {
    double s = lambda.weights.dot(feature_vector(x, y, lambda.shape));
    if (extra) s += extra(y);
    sum += std::exp(s - e.log_z) * g(y);
  });
  return sum;
}

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double up = f(y);
    y[i] = x[i] - h;
    const double down = f(y);
    y[i] = x[i];
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  if (scale == 0.0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// One to three distinct inputs per position, real values in [0.5, 1.5].
inline SequenceInstance random_instance(std::mt19937_64& rng, std::size_t num_inputs, int length, int labels,
                                        bool with_gold) {
  SequenceInstance inst;
  for (int t = 0; t < length; ++t) {
    std::vector<altproj::FeatureValue> fs;
    std::vector<std::size_t> ids(num_inputs);
    for (std::size_t i = 0; i < num_inputs; ++i) ids[i] = i;
    std::shuffle(ids.begin(), ids.end(), rng);
    const int n = uniform_int(rng, 1, std::min<int>(3, static_cast<int>(num_inputs)));
    for (int i = 0; i < n; ++i) fs.push_back({ids[static_cast<std::size_t>(i)], uniform_real(rng, 0.5, 1.5)});
    inst.positions.push_back(altproj::SparseFeatures::from_unsorted(std::move(fs)));
  }
  if (with_gold) {
    LabelSequence y;
    for (int t = 0; t < length; ++t) y.push_back(uniform_int(rng, 0, labels - 1));
    inst.gold = std::move(y);
  }
  return inst;
}

inline ParamVector random_params(std::mt19937_64& rng, const ModelShape& shape, double scale) {
  ParamVector p(shape);
  for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights[i] = uniform_real(rng, -scale, scale);
  return p;
}

}  // namespace support

#endif  // ALTPROJ_TESTS_SUPPORT_HPP
