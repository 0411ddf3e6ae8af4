#include "altproj/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "altproj/checkpoint.hpp"
#include "altproj/constraint_file.hpp"
#include "altproj/dataset.hpp"
#include "altproj/evaluate.hpp"
#include "altproj/ge.hpp"
#include "altproj/oracle_check.hpp"
#include "altproj/projections.hpp"
#include "altproj/synth.hpp"

namespace altproj {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TrainArgs {
  std::string task;
  std::string trainer = "ap";
  std::string mode = "batch";
  bool transductive = false;
  bool inductive = false;
  std::string constraints;
  std::string labeled;
  std::string unlabeled;
  std::string test;
  std::vector<std::string> labels;
  std::optional<double> beta;
  TrainConfig config;
  std::string out;
};

std::vector<SequenceInstance> strip_gold(std::span<const SequenceInstance> data) {
  std::vector<SequenceInstance> out(data.begin(), data.end());
  for (auto& inst : out) inst.gold.reset();
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : ",") + p;
  return s;
}

int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.transductive && a.inductive) throw ConfigError("--transductive and --inductive are exclusive");
  if (a.transductive && a.test.empty()) throw ConfigError("--transductive needs --test");
  if (a.trainer != "ap" && a.trainer != "ge" && a.trainer != "sup") throw ConfigError("unknown trainer '" + a.trainer + "'");
  TrainConfig config = a.config;
  if (a.mode == "batch") config.mode = TrainMode::Batch;
  else if (a.mode == "online") config.mode = TrainMode::Online;
  else throw ConfigError("unknown mode '" + a.mode + "'");
  config.sampler.seed = config.seed;
  config.validate();

  const auto t_load = Clock::now();
  Dataset data;
  data.kind = parse_task(a.task);
  for (const auto& l : a.labels) data.labels.intern(l);
  if (!a.labeled.empty()) read_file(a.labeled, data);
  if (!a.unlabeled.empty()) read_file(a.unlabeled, data);
  Dataset test = data;
  test.labeled.clear();
  test.unlabeled.clear();
  test.order.clear();
  if (!a.test.empty()) {
    ReadOptions opts;
    opts.freeze_vocabulary = !a.transductive;
    read_file(a.test, test, opts);
    data.vocabulary = test.vocabulary;
    data.labels = test.labels;
  }

  std::vector<SequenceInstance> pool = strip_gold(data.unlabeled);
  if (a.transductive) {
    for (std::size_t i = 0; i < test.size(); ++i) {
      SequenceInstance inst = test.at(i);
      inst.gold.reset();
      pool.push_back(std::move(inst));
    }
  }

  ConstraintSet set;
  set.chain = data.kind == TaskKind::Sequence;
  set.by_instance.resize(pool.size());
  if (!a.constraints.empty()) {
    ParsedConstraints parsed = parse_constraints_file(a.constraints, data, true);
    if (a.beta)
      for (auto& spec : parsed.specs) spec.penalty.beta = *a.beta;
    set = scale_targets(std::move(parsed.specs), pool, data.kind == TaskKind::Sequence);
    set.warnings.insert(set.warnings.begin(), parsed.warnings.begin(), parsed.warnings.end());
  }
  for (const auto& w : set.warnings) err << "warning: " << w << '\n';
  if (data.labels.size() < 2) throw ConfigError("need at least two labels (from data, --labels or constraints)");
  const ModelShape shape = data.shape();
  const double load_seconds = seconds_since(t_load);

  const auto t_train = Clock::now();
  Checkpoint ckpt;
  ckpt.task = data.kind;
  ckpt.labels = data.labels;
  ckpt.vocabulary = data.vocabulary;
  std::vector<double> trace;
  if (a.trainer == "sup") {
    if (data.labeled.empty()) err << "warning: no labeled data; the model stays at zero\n";
    ckpt.lambda = data.labeled.empty() ? ParamVector(shape) : supervised_train(data.labeled, shape, config);
    ckpt.iteration = 1;
  } else if (a.trainer == "ge") {
    if (data.kind != TaskKind::Classification) throw ConfigError("GE training is available for --task clf only");
    const std::vector<GETerm> terms = ge_terms(set, config.gamma);
    ckpt.lambda = ge_train(terms, data.labeled, pool, shape, config);
    ckpt.iteration = 1;
  } else {
    const APState state = ap_train(data.labeled, pool, set, shape, config);
    ckpt.lambda = state.lambda;
    ckpt.mu = state.mu.mu;
    ckpt.iteration = state.iteration;
    trace = state.objective_trace;
  }
  const double train_seconds = seconds_since(t_train);

  ckpt.settings = {{"trainer", a.trainer},
                   {"mode", a.mode},
                   {"alpha", format_number(config.alpha)},
                   {"gamma", format_number(config.gamma)},
                   {"T", std::to_string(config.iterations)},
                   {"eta0", format_number(config.eta0)},
                   {"seed", std::to_string(config.seed)},
                   {"transductive", a.transductive ? "1" : "0"}};
  save_checkpoint(a.out, ckpt);

  for (std::size_t i = 0; i < trace.size(); ++i) out << "trace\t" << i << '\t' << format_number(trace[i]) << '\n';
  out << "time.load_seconds\t" << load_seconds << '\n';
  out << "time.train_seconds\t" << train_seconds << '\n';
  if (!a.test.empty() && !test.labeled.empty()) {
    const ExperimentReport report = evaluate(ckpt.lambda, test.labeled, data.label_space());
    out << "test.accuracy\t" << format_number(report.accuracy) << '\n';
    out << "test.macro_f1\t" << format_number(report.macro_f1) << '\n';
  }
  return kExitOk;
}

int run_label(const std::string& model, const std::string& input, const std::string& output, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(model);
  Dataset data = ckpt.empty_dataset();
  ReadOptions opts;
  opts.freeze_vocabulary = true;
  opts.freeze_labels = true;
  read_file(input, data, opts);
  std::vector<SequenceInstance> all;
  for (std::size_t i = 0; i < data.size(); ++i) all.push_back(data.at(i));
  const std::vector<LabelSequence> predicted = decode_all(ckpt.lambda, all);
  if (output.empty()) {
    write_dataset(out, data, &predicted);
  } else {
    std::ofstream f(output);
    if (!f) throw Error("cannot write '" + output + "'");
    write_dataset(f, data, &predicted);
  }
  return kExitOk;
}

int run_eval(const std::string& model, const std::string& input, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(model);
  Dataset data = ckpt.empty_dataset();
  ReadOptions opts;
  opts.freeze_vocabulary = true;
  opts.freeze_labels = true;
  read_file(input, data, opts);
  if (!data.unlabeled.empty()) throw ContractError("evaluation data contains unlabeled instances");
  write_report(out, evaluate(ckpt.lambda, data.labeled, LabelSpace(ckpt.labels.names())));
  return kExitOk;
}

int run_synth(const SynthSpec& spec, const std::string& style, std::uint64_t seed, const std::string& dir,
              std::ostream& out) {
  SynthSpec s = spec;
  if (style == "markov") s.style = ChainStyle::Markov;
  else if (style == "segments") s.style = ChainStyle::Segments;
  else throw ConfigError("unknown style '" + style + "'");
  const SynthData data = synth_generate(s, seed);
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& name, const auto& fn) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream f(path);
    if (!f) throw Error("cannot write '" + path + "'");
    fn(f);
    out << "wrote\t" << path << '\n';
  };
  write("labeled.txt", [&](std::ostream& f) { write_dataset(f, data.labeled); });
  write("unlabeled.txt", [&](std::ostream& f) { write_dataset(f, data.unlabeled); });
  write("test.txt", [&](std::ostream& f) { write_dataset(f, data.test); });
  write("constraints.txt", [&](std::ostream& f) { write_constraints(f, data.constraints, data.labeled); });
  write("labels.txt", [&](std::ostream& f) { f << join(data.labeled.labels.names()) << '\n'; });
  return kExitOk;
}

int run_oracle(const OracleCheckOptions& options, std::ostream& out) {
  const auto results = run_oracle_checks(options);
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS" : "FAIL") << '\t' << r.name << '\t' << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitInvariant;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Alternating-projection training for log-linear classifiers and linear-chain CRFs"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  t->add_option("--task", train.task, "clf or seq")->required();
  t->add_option("--trainer", train.trainer, "ap, ge or sup")->capture_default_str();
  t->add_option("--mode", train.mode, "batch or online")->capture_default_str();
  t->add_flag("--transductive", train.transductive, "Add the --test inputs to the unlabeled pool");
  t->add_flag("--inductive", train.inductive, "Keep test inputs out of training (default)");
  t->add_option("--constraints", train.constraints, "Constraint file");
  t->add_option("--labeled", train.labeled, "Labeled data file");
  t->add_option("--unlabeled", train.unlabeled, "Unlabeled data file");
  t->add_option("--test", train.test, "Test file; scored after training");
  t->add_option("--labels", train.labels, "Label names, in order")->delimiter(',');
  t->add_option("--alpha", train.config.alpha, "L2 weight on lambda")->capture_default_str();
  t->add_option("--beta", train.beta, "Override every constraint's beta");
  t->add_option("--gamma", train.config.gamma, "Weight of the unlabeled term")->capture_default_str();
  t->add_option("--T", train.config.iterations, "AP rounds (batch) or epochs (online)")->capture_default_str();
  t->add_option("--eta0", train.config.eta0, "Initial online learning rate")->capture_default_str();
  t->add_option("--seed", train.config.seed, "Random seed")->capture_default_str();
  t->add_flag("--warm-start", train.config.warm_start, "Start from the supervised fit");
  t->add_option("--burn-in", train.config.sampler.burn_in, "Gibbs burn-in sweeps")->capture_default_str();
  t->add_option("--samples", train.config.sampler.sample_sweeps, "Gibbs sample sweeps")->capture_default_str();
  t->add_option("--thinning", train.config.sampler.thinning, "Keep every n-th sweep")->capture_default_str();
  t->add_option("--sampled-iters", train.config.sampled_inner_iters, "Stochastic I-projection rounds")
      ->capture_default_str();
  t->add_option("--out", train.out, "Checkpoint path")->required();

  std::string model, input, output;
  auto* l = app.add_subcommand("label", "Decode a data file with a checkpoint");
  l->add_option("--model", model, "Checkpoint")->required();
  l->add_option("--input", input, "Data file (labels are ignored)")->required();
  l->add_option("--output", output, "Output file (default: stdout)");

  auto* e = app.add_subcommand("eval", "Score a labeled file; key<TAB>value report");
  e->add_option("--model", model, "Checkpoint")->required();
  e->add_option("--data", input, "Labeled data file")->required();

  SynthSpec synth;
  std::string synth_task = "clf", style = "markov", dir;
  std::uint64_t synth_seed = 0;
  auto* s = app.add_subcommand("synth", "Write a synthetic task: data splits and constraints");
  s->add_option("--task", synth_task, "clf or seq")->capture_default_str();
  s->add_option("--style", style, "markov or segments (seq only)")->capture_default_str();
  s->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  s->add_option("--num-labels", synth.num_labels)->capture_default_str();
  s->add_option("--labeled", synth.labeled)->capture_default_str();
  s->add_option("--unlabeled", synth.unlabeled)->capture_default_str();
  s->add_option("--test", synth.test)->capture_default_str();
  s->add_option("--self-transition", synth.self_transition)->capture_default_str();
  s->add_option("--min-length", synth.min_length)->capture_default_str();
  s->add_option("--max-length", synth.max_length)->capture_default_str();
  s->add_option("--out", dir, "Output directory")->required();

  OracleCheckOptions oracle;
  auto* o = app.add_subcommand("oracle-check", "Run enumeration and finite-difference self-checks");
  o->add_option("--seed", oracle.seed, "Random seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (t->parsed()) return run_train(train, out, err);
    if (l->parsed()) return run_label(model, input, output, out);
    if (e->parsed()) return run_eval(model, input, out);
    if (s->parsed()) {
      synth.task = parse_task(synth_task);
      return run_synth(synth, style, synth_seed, dir, out);
    }
    if (o->parsed()) return run_oracle(oracle, out);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const OptimizationError& ex) {
    err << "optimization failed: " << ex.what() << '\n';
    return kExitOptimization;
  } catch (const NumericError& ex) {
    err << "numerical failure: " << ex.what() << '\n';
    return kExitOptimization;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace altproj
