#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "altproj/checkpoint.hpp"
#include "altproj/constraint_file.hpp"
#include "altproj/dataset.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace altproj;

namespace {

Dataset read_clf(const std::string& text, const ReadOptions& options = {}) {
  Dataset d;
  std::istringstream in(text);
  read_classification(in, d, options);
  return d;
}

Dataset read_seq(const std::string& text, const ReadOptions& options = {}) {
  Dataset d;
  d.kind = TaskKind::Sequence;
  std::istringstream in(text);
  read_sequences(in, d, options);
  return d;
}

ParsedConstraints parse(const std::string& text, Dataset& d, bool grow = true) {
  std::istringstream in(text);
  return parse_constraints(in, d, grow);
}

std::size_t error_line(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("classification lines") {
  const Dataset d = read_clf("ibm windows:1 drive:2\n? firewire:1\n\nmac drive:0.5 windows:1\n");
  REQUIRE(d.size() == 3);
  CHECK(d.labeled.size() == 2);
  CHECK(d.unlabeled.size() == 1);
  CHECK(d.labels.names() == std::vector<std::string>{"ibm", "mac"});
  CHECK(d.vocabulary.names() == std::vector<std::string>{"windows", "drive", "firewire"});
  const SequenceInstance& first = d.at(0);
  CHECK(first.gold == LabelSequence{0});
  CHECK(first.positions[0].value(0) == 1.0);
  CHECK(first.positions[0].value(1) == 2.0);
  CHECK_FALSE(d.at(1).gold.has_value());
  CHECK(d.shape().num_inputs == 3);
  CHECK_FALSE(d.shape().chain);

  CHECK(error_line([] { read_clf("a x:1\nb y\n"); }) == 2);
  CHECK(error_line([] { read_clf("a x:nan\n"); }) == 1);
  CHECK(error_line([] { read_clf("a x:1e999\n"); }) == 1);
}

TEST_CASE("sequence blocks") {
  const Dataset d = read_seq("Smith\tCAP\tauthor\nJ.\tauthor\n\nThe\ttitle\n\nfoo\t?\nbar\t?\n");
  REQUIRE(d.size() == 3);
  CHECK(d.labeled.size() == 2);
  CHECK(d.unlabeled.size() == 1);
  CHECK(d.at(0).positions.size() == 2);
  CHECK(d.at(0).gold == LabelSequence{0, 0});
  CHECK(d.at(0).positions[0].size() == 2);
  CHECK(d.at(1).gold == LabelSequence{1});
  CHECK(d.at(2).positions.size() == 2);
  CHECK(d.shape().chain);

  CHECK(error_line([] { read_seq("a\tx\nb\t?\n"); }) == 1);
  CHECK_THROWS_AS(read_seq("a\tx\n\nb\ty\n", ReadOptions{false, true}), ParseError);
  const Dataset frozen = read_seq("a\tb\tx\n", ReadOptions{true, false});
  CHECK(frozen.at(0).positions[0].size() == 0);
}

TEST_CASE("canonical text round trips") {
  const std::string clf = "ibm windows:1 drive:0.1\n? firewire:1\nmac drive:3.25e-07\n";
  const Dataset a = read_clf(clf);
  const std::string once = to_string(a);
  CHECK(to_string(read_clf(once)) == once);
  CHECK(once == clf);

  const std::string seq = "Smith\tCAP\tauthor\nJ.\tauthor\n\nfoo\t?\n";
  const Dataset b = read_seq(seq);
  CHECK(to_string(read_seq(to_string(b))) == to_string(b));

  std::ostringstream out;
  const std::vector<LabelSequence> pred{{1}, {0}, {0}};
  write_dataset(out, a, &pred);
  CHECK(out.str().rfind("mac windows:1", 0) == 0);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::ldexp(support::uniform_real(rng, -1, 1), support::uniform_int(rng, -60, 60));
    CHECK(parse_number(format_number(x), 1) == x);
  }
}

TEST_CASE("constraint files") {
  Dataset d = read_clf("ibm windows:1 drive:1\nmac drive:1\n");
  SUBCASE("word-label block") {
    const ParsedConstraints p =
        parse("# prior\nkind=word-label\ntrigger=windows\nlabel=ibm\ntarget=0.95\npenalty=l2\nbeta=0.01\n", d);
    REQUIRE(p.specs.size() == 1);
    const ConstraintSpec& s = p.specs[0];
    CHECK(s.feature.kind == ConstraintKind::WordLabel);
    CHECK(s.feature.trigger == 0);
    CHECK(s.feature.label == 0);
    CHECK(s.target == 0.95);
    CHECK(s.penalty.kind == PenaltyKind::L2);
    CHECK(s.penalty.beta == 0.01);
    CHECK(s.mode == TargetMode::Proportion);

    std::ostringstream out;
    write_constraints(out, p.specs, d);
    const ParsedConstraints again = parse(out.str(), d);
    REQUIRE(again.specs.size() == 1);
    CHECK(again.specs[0].target == s.target);
    CHECK(again.specs[0].penalty.beta == s.penalty.beta);
    CHECK(again.specs[0].feature.trigger == s.feature.trigger);
  }
  SUBCASE("sequence kinds and defaults") {
    Dataset q = read_seq("Smith\tauthor\nThe\ttitle\n");
    const ParsedConstraints p = parse(
        "kind=self-transition\ntarget=0.9\n\n"
        "kind=repetition-count\nscope=per-instance\ntarget-mode=count\ntarget=0\npenalty=affine\n\n"
        "kind=transition-on-predicate\ntrigger=The\nnegate=true\ntarget=0.1\n",
        q);
    REQUIRE(p.specs.size() == 3);
    CHECK(p.specs[1].feature.scope == Scope::PerInstance);
    CHECK(p.specs[1].mode == TargetMode::AbsoluteCount);
    CHECK(p.specs[1].penalty.kind == PenaltyKind::Affine);
    CHECK_FALSE(p.specs[2].feature.predicate_holds);
  }
  SUBCASE("unknown triggers are dropped with a warning") {
    const ParsedConstraints p = parse("kind=word-label\ntrigger=linux\nlabel=ibm\ntarget=0.5\n", d);
    CHECK(p.specs.empty());
    CHECK(p.warnings.size() == 1);
  }
  SUBCASE("rejections") {
    CHECK(error_line([&] { parse("kind=word-label\ntrigger=windows\nlabel=ibm\n", d); }) == 1);
    CHECK(error_line([&] { parse("kind=word-label\ntrigger=windows\nlabel=ibm\ntarget=1.5\n", d); }) == 4);
    CHECK(error_line([&] { parse("kind=word-label\ncolour=red\n", d); }) == 2);
    CHECK(error_line([&] { parse("kind=word-label\nkind=word-label\n", d); }) == 2);
    CHECK(error_line([&] { parse("kind=custom-count\ntarget=1\n", d); }) == 1);
    CHECK(error_line([&] { parse("kind=self-transition\nlabel=ibm\ntarget=1\n", d); }) == 2);
    CHECK(error_line([&] { parse("kind=self-transition\nnormalize=true\ntarget=1\n", d); }) == 2);
    CHECK(error_line([&] { parse("kind=word-label\ntrigger=windows\nlabel=ibm\ntarget=0.5\nbeta=-1\n", d); }) == 5);
    CHECK(error_line([&] { parse("kind=word-label\ntrigger=windows\nlabel=sun\ntarget=0.5\n", d, false); }) == 3);
    CHECK(error_line([&] { parse("just text\n", d); }) == 1);
  }
}

TEST_CASE("checkpoints are bit-exact") {
  std::mt19937_64 rng(5);
  Checkpoint c;
  c.task = TaskKind::Sequence;
  for (const char* l : {"author", "title", "venue"}) c.labels.intern(l);
  for (const char* w : {"Smith", "The", "Proc.", "a b"}) c.vocabulary.intern(w);
  c.lambda = support::random_params(rng, ModelShape{4, 3, true}, 3.0);
  c.lambda.weights[0] = 1e-300;
  c.lambda.weights[1] = -0.1;
  c.mu = Eigen::VectorXd::Random(5);
  c.iteration = 7;
  c.settings["gamma"] = "0.1";

  std::ostringstream out;
  write_checkpoint(out, c);
  std::istringstream in(out.str());
  const Checkpoint r = read_checkpoint(in);
  CHECK(r.task == c.task);
  CHECK(r.labels.names() == c.labels.names());
  CHECK(r.vocabulary.names() == c.vocabulary.names());
  CHECK(r.lambda.shape.dim() == c.lambda.shape.dim());
  CHECK(r.lambda.weights == c.lambda.weights);
  CHECK(r.mu == c.mu);
  CHECK(r.iteration == 7);
  CHECK(r.settings == c.settings);
  std::ostringstream again;
  write_checkpoint(again, r);
  CHECK(again.str() == out.str());

  std::istringstream junk("hello\n");
  CHECK_THROWS_AS(read_checkpoint(junk), ParseError);
  std::string cut = out.str();
  cut.resize(cut.size() / 2);
  std::istringstream truncated(cut);
  CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
  Checkpoint bad = c;
  bad.labels.intern("extra");
  std::ostringstream sink;
  CHECK_THROWS_AS(write_checkpoint(sink, bad), ContractError);
}
