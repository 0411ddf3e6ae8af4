#include "altproj/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace altproj {

namespace {

constexpr const char* kMagic = "altproj-checkpoint 1";

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) throw ParseError("unexpected end of checkpoint", line_ + 1);
    ++line_;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
  }

  // "<key>\t<value>"
  std::string field(const std::string& key) {
    const std::string s = line();
    const auto tab = s.find('\t');
    if (tab == std::string::npos || s.substr(0, tab) != key) throw ParseError("expected '" + key + "'", line_);
    return s.substr(tab + 1);
  }

  std::size_t count(const std::string& key) {
    const std::string v = field(key);
    const double n = parse_number(v, line_);
    if (n < 0 || n != static_cast<double>(static_cast<std::size_t>(n))) throw ParseError("bad count", line_);
    return static_cast<std::size_t>(n);
  }

  double number() { return parse_number(line(), line_); }
  std::size_t at() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

void write_table(std::ostream& out, const char* key, const Interner& table) {
  out << key << '\t' << table.size() << '\n';
  for (const auto& name : table.names()) out << name << '\n';
}

void read_table(Reader& r, const char* key, Interner& table) {
  const std::size_t n = r.count(key);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = r.line();
    if (table.intern(name) != i) throw ParseError("duplicate name '" + name + "'", r.at());
  }
}

}  // namespace

Dataset Checkpoint::empty_dataset() const {
  Dataset d;
  d.kind = task;
  d.labels = labels;
  d.vocabulary = vocabulary;
  return d;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const ModelShape& shape = ckpt.lambda.shape;
  if (shape.num_inputs != ckpt.vocabulary.size() || static_cast<std::size_t>(shape.num_labels) != ckpt.labels.size() ||
      shape.chain != (ckpt.task == TaskKind::Sequence))
    throw ContractError("checkpoint tables do not match the parameter layout");
  out << kMagic << '\n';
  out << "task\t" << task_name(ckpt.task) << '\n';
  write_table(out, "labels", ckpt.labels);
  write_table(out, "vocabulary", ckpt.vocabulary);
  out << "lambda\t" << ckpt.lambda.weights.size() << '\n';
  for (Eigen::Index i = 0; i < ckpt.lambda.weights.size(); ++i) out << format_number(ckpt.lambda.weights[i]) << '\n';
  out << "mu\t" << ckpt.mu.size() << '\n';
  for (Eigen::Index i = 0; i < ckpt.mu.size(); ++i) out << format_number(ckpt.mu[i]) << '\n';
  out << "iteration\t" << ckpt.iteration << '\n';
  out << "settings\t" << ckpt.settings.size() << '\n';
  for (const auto& [k, v] : ckpt.settings) out << k << '\t' << v << '\n';
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  if (r.line() != kMagic) throw ParseError("not a checkpoint file", 1);
  Checkpoint c;
  c.task = parse_task(r.field("task"));
  read_table(r, "labels", c.labels);
  read_table(r, "vocabulary", c.vocabulary);
  const ModelShape shape{c.vocabulary.size(), static_cast<int>(c.labels.size()), c.task == TaskKind::Sequence};
  const std::size_t dim = r.count("lambda");
  if (dim != shape.dim()) throw ParseError("parameter count does not match the tables", r.at());
  Eigen::VectorXd w(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) w[static_cast<Eigen::Index>(i)] = r.number();
  c.lambda = ParamVector(shape, std::move(w));
  const std::size_t nmu = r.count("mu");
  c.mu.resize(static_cast<Eigen::Index>(nmu));
  for (std::size_t i = 0; i < nmu; ++i) c.mu[static_cast<Eigen::Index>(i)] = r.number();
  c.iteration = static_cast<int>(r.count("iteration"));
  const std::size_t ns = r.count("settings");
  for (std::size_t i = 0; i < ns; ++i) {
    const std::string s = r.line();
    const auto tab = s.find('\t');
    if (tab == std::string::npos) throw ParseError("expected key<TAB>value", r.at());
    c.settings[s.substr(0, tab)] = s.substr(tab + 1);
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_checkpoint(out, ckpt);
  if (!out) throw Error("failed writing '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return read_checkpoint(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

}  // namespace altproj
