#include <cmath>
#include <random>

#include "altproj/inference.hpp"
#include "altproj/model.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace altproj;

namespace {

Instance one_feature_instance() {
  Instance inst;
  inst.features = SparseFeatures({{0, 1.0}});
  return inst;
}

}  // namespace

TEST_CASE("softmax at zero parameters is uniform") {
  const ParamVector p(ModelShape{1, 3, false});
  const Posterior post = classify_posterior(p, one_feature_instance(), LabelSpace::anonymous(3));
  for (int y = 0; y < 3; ++y) CHECK(post.node(0, y) == doctest::Approx(1.0 / 3));
  CHECK(post.log_z == doctest::Approx(std::log(3.0)));
}

TEST_CASE("softmax closed forms") {
  ParamVector p(ModelShape{1, 2, false});
  p.weights << 0.0, std::log(3.0);
  Posterior post = classify_posterior(p, one_feature_instance(), LabelSpace::anonymous(2));
  CHECK(post.node(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(post.node(0, 1) == doctest::Approx(0.75).epsilon(1e-12));

  ParamVector q(ModelShape{1, 3, false});
  q.weights << 0.0, 0.0, std::log(2.0);
  post = classify_posterior(q, one_feature_instance(), LabelSpace::anonymous(3));
  CHECK(post.node(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(post.node(0, 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("length-one chain equals the classifier") {
  std::mt19937_64 rng(3);
  const ModelShape shape{4, 3, true};
  const ParamVector p = support::random_params(rng, shape, 1.0);
  const SequenceInstance s = support::random_instance(rng, 4, 1, 3, false);
  ParamVector flat(ModelShape{4, 3, false}, p.weights.head(12));
  Instance inst;
  inst.features = s.positions[0];
  const Posterior a = chain_posterior(p, s, LabelSpace::anonymous(3));
  const Posterior b = classify_posterior(flat, inst, LabelSpace::anonymous(3));
  CHECK((a.node - b.node).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(a.log_z == doctest::Approx(b.log_z).epsilon(1e-12));
}

TEST_CASE("uniform chain") {
  const ParamVector p(ModelShape{2, 2, true});
  SequenceInstance s;
  for (int t = 0; t < 3; ++t) s.positions.push_back(SparseFeatures({{0, 1.0}}));
  const Posterior post = chain_posterior(p, s, LabelSpace::anonymous(2));
  CHECK(post.log_z == doctest::Approx(3 * std::log(2.0)).epsilon(1e-12));
  CHECK((post.node.array() - 0.5).abs().maxCoeff() < 1e-12);
  CHECK((post.edges.array() - 0.25).abs().maxCoeff() < 1e-12);

  SequenceInstance two;
  two.positions.assign(2, SparseFeatures({{1, 1.0}}));
  CHECK(brute_force_posterior(p, two, LabelSpace::anonymous(2)).log_z == doctest::Approx(2 * std::log(2.0)));
}

TEST_CASE("forward-backward matches enumeration on random chains") {
  std::mt19937_64 rng(11);
  for (int c = 0; c < 100; ++c) {
    const int k = support::uniform_int(rng, 2, 4);
    const int len = support::uniform_int(rng, 1, 5);
    const ModelShape shape{5, k, true};
    const ParamVector p = support::random_params(rng, shape, 1.5);
    const SequenceInstance s = support::random_instance(rng, 5, len, k, false);
    const Posterior post = chain_posterior(p, s, LabelSpace::anonymous(k));
    const support::Enumerated e = support::enumerate(p, s);
    CHECK(std::abs(post.log_z - e.log_z) < 1e-9);
    CHECK((post.node - e.node).cwiseAbs().maxCoeff() < 1e-9);
    if (len > 1) CHECK((post.edges - e.edges).cwiseAbs().maxCoeff() < 1e-9);

    Eigen::VectorXd expected = Eigen::VectorXd::Zero(p.weights.size());
    add_expected_features(post, s, shape, 1.0, expected);
    CHECK((expected - e.features).cwiseAbs().maxCoeff() < 1e-9);

    const Posterior brute = brute_force_posterior(p, s, LabelSpace::anonymous(k));
    CHECK(std::abs(brute.log_z - post.log_z) < 1e-9);
  }
}

TEST_CASE("viterbi") {
  const LabelSpace labels = LabelSpace::anonymous(3);
  SequenceInstance s;
  for (int t = 0; t < 4; ++t) s.positions.push_back(SparseFeatures({{0, 1.0}}));

  SUBCASE("ties resolve to label 0") {
    const ParamVector p(ModelShape{1, 3, true});
    CHECK(viterbi(p, s, labels) == LabelSequence{0, 0, 0, 0});
  }
  SUBCASE("dominant node potentials") {
    ParamVector p(ModelShape{1, 2, true});
    p.weights[1] = 10.0;
    CHECK(viterbi(p, s, LabelSpace::anonymous(2)) == LabelSequence{1, 1, 1, 1});
  }
  SUBCASE("random potentials reach the enumerated maximum") {
    std::mt19937_64 rng(5);
    for (int c = 0; c < 50; ++c) {
      const ParamVector p = support::random_params(rng, ModelShape{4, 3, true}, 2.0);
      const SequenceInstance x = support::random_instance(rng, 4, 4, 3, false);
      const LabelSequence y = viterbi(p, x, labels);
      const support::Enumerated e = support::enumerate(p, x);
      CHECK(std::abs(score(p, x, y) - e.max_score) < 1e-9);
    }
  }
}

TEST_CASE("expected model features") {
  SUBCASE("uniform posterior averages the labels") {
    const ParamVector p(ModelShape{1, 2, false});
    Instance inst = one_feature_instance();
    const Posterior post = classify_posterior(p, inst, LabelSpace::anonymous(2));
    const SparseFeatures e = expected_model_features(post, inst, p.shape);
    CHECK(e.value(0) == doctest::Approx(0.5));
    CHECK(e.value(1) == doctest::Approx(0.5));
  }
  SUBCASE("point mass reproduces the observed features") {
    std::mt19937_64 rng(2);
    const ModelShape shape{4, 3, true};
    const SequenceInstance x = support::random_instance(rng, 4, 4, 3, true);
    Posterior post;
    post.node = Eigen::MatrixXd::Zero(4, 3);
    post.edges = Eigen::MatrixXd::Zero(3, 9);
    for (int t = 0; t < 4; ++t) post.node(t, (*x.gold)[static_cast<std::size_t>(t)]) = 1.0;
    for (int t = 0; t < 3; ++t)
      post.edge(t)((*x.gold)[static_cast<std::size_t>(t)], (*x.gold)[static_cast<std::size_t>(t + 1)]) = 1.0;
    const SparseFeatures e = expected_model_features(post, x, shape);
    const Eigen::VectorXd f = support::feature_vector(x, *x.gold, shape);
    for (Eigen::Index i = 0; i < f.size(); ++i) CHECK(e.value(static_cast<std::size_t>(i)) == doctest::Approx(f[i]));
  }
}

TEST_CASE("inference rejects bad input") {
  ParamVector p(ModelShape{2, 2, true});
  SequenceInstance s;
  s.positions.push_back(SparseFeatures({{5, 1.0}}));
  CHECK_THROWS_AS(chain_posterior(p, s, LabelSpace::anonymous(2)), IndexError);
  p.weights[0] = INFINITY;
  s.positions[0] = SparseFeatures({{0, 1.0}});
  CHECK_THROWS_AS(chain_posterior(p, s, LabelSpace::anonymous(2)), NumericError);
  CHECK_THROWS_AS(SparseFeatures({{2, 1.0}, {1, 1.0}}), ContractError);
  CHECK_THROWS_AS(LabelSpace::anonymous(1), ContractError);
  SequenceInstance big;
  big.positions.assign(30, SparseFeatures({{0, 1.0}}));
  CHECK_THROWS_AS(brute_force_posterior(ParamVector(ModelShape{1, 3, true}), big, LabelSpace::anonymous(3)),
                  GuardError);
}
