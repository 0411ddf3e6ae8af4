#include "altproj/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace altproj {

const char* task_name(TaskKind kind) { return kind == TaskKind::Classification ? "clf" : "seq"; }

TaskKind parse_task(const std::string& name) {
  if (name == "clf" || name == "classification") return TaskKind::Classification;
  if (name == "seq" || name == "sequence") return TaskKind::Sequence;
  throw ConfigError("unknown task '" + name + "' (expected clf or seq)");
}

ModelShape Dataset::shape() const {
  return ModelShape{vocabulary.size(), static_cast<int>(labels.size()), kind == TaskKind::Sequence};
}

LabelSpace Dataset::label_space() const { return LabelSpace(labels.names()); }

const SequenceInstance& Dataset::at(std::size_t i) const {
  const auto [is_labeled, index] = order.at(i);
  return is_labeled ? labeled[index] : unlabeled[index];
}

void Dataset::add(SequenceInstance inst) {
  if (inst.labeled()) {
    order.emplace_back(true, labeled.size());
    labeled.push_back(std::move(inst));
  } else {
    order.emplace_back(false, unlabeled.size());
    unlabeled.push_back(std::move(inst));
  }
}

std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view text, std::size_t line) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != last)
    throw ParseError("malformed number '" + std::string(text) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite number '" + std::string(text) + "'", line);
  return v;
}

namespace {

std::vector<std::string_view> split(std::string_view s, bool tabs_only) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto is_sep = [&](char c) { return c == '\t' || (!tabs_only && c == ' '); };
    if (is_sep(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && !is_sep(s[j])) ++j;
    out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t") == std::string_view::npos; }

std::optional<Label> read_label(std::string_view field, Dataset& data, const ReadOptions& options, std::size_t line) {
  if (field == "?") return std::nullopt;
  if (options.freeze_labels) {
    auto id = data.labels.find(field);
    if (!id) throw ParseError("unknown label '" + std::string(field) + "'", line);
    return static_cast<Label>(*id);
  }
  return static_cast<Label>(data.labels.intern(field));
}

std::optional<std::size_t> read_feature(std::string_view name, Dataset& data, const ReadOptions& options) {
  if (options.freeze_vocabulary) return data.vocabulary.find(name);
  return data.vocabulary.intern(name);
}

}  // namespace

void read_classification(std::istream& in, Dataset& data, const ReadOptions& options) {
  if (data.kind != TaskKind::Classification) throw ContractError("dataset is not a classification dataset");
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim_cr(raw);
    if (blank(text)) continue;
    const auto fields = split(text, false);
    SequenceInstance inst;
    const auto label = read_label(fields[0], data, options, line);
    std::vector<FeatureValue> features;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto colon = fields[i].rfind(':');
      if (colon == std::string_view::npos || colon == 0)
        throw ParseError("expected <feature>:<value>, got '" + std::string(fields[i]) + "'", line);
      const double value = parse_number(fields[i].substr(colon + 1), line);
      if (auto id = read_feature(fields[i].substr(0, colon), data, options)) features.push_back({*id, value});
    }
    inst.positions.push_back(SparseFeatures::from_unsorted(std::move(features)));
    if (label) inst.gold = LabelSequence{*label};
    data.add(std::move(inst));
  }
}

void read_sequences(std::istream& in, Dataset& data, const ReadOptions& options) {
  if (data.kind != TaskKind::Sequence) throw ContractError("dataset is not a sequence dataset");
  std::string raw;
  std::size_t line = 0;
  std::size_t start_line = 0;
  SequenceInstance current;
  LabelSequence gold;
  std::size_t unknown = 0;

  const auto flush = [&]() {
    if (current.positions.empty()) return;
    if (unknown != 0 && unknown != current.positions.size())
      throw ParseError("sequence mixes labeled and unlabeled tokens", start_line);
    if (unknown == 0) current.gold = gold;
    data.add(std::move(current));
    current = SequenceInstance{};
    gold.clear();
    unknown = 0;
  };

  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim_cr(raw);
    if (blank(text)) {
      flush();
      continue;
    }
    if (current.positions.empty()) start_line = line;
    const auto fields = split(text, true);
    const auto label = read_label(fields.back(), data, options, line);
    std::vector<FeatureValue> features;
    for (std::size_t i = 0; i + 1 < fields.size(); ++i)
      if (auto id = read_feature(fields[i], data, options)) features.push_back({*id, 1.0});
    current.positions.push_back(SparseFeatures::from_unsorted(std::move(features)));
    if (label)
      gold.push_back(*label);
    else
      ++unknown;
  }
  flush();
}

void read_file(const std::string& path, Dataset& data, const ReadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    if (data.kind == TaskKind::Classification)
      read_classification(in, data, options);
    else
      read_sequences(in, data, options);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void write_dataset(std::ostream& out, const Dataset& data, const std::vector<LabelSequence>* predictions) {
  if (predictions && predictions->size() != data.size())
    throw ContractError("need one prediction per instance");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const SequenceInstance& inst = data.at(i);
    const LabelSequence* y = predictions ? &(*predictions)[i] : (inst.gold ? &*inst.gold : nullptr);
    if (y && y->size() != inst.positions.size()) throw ContractError("prediction length mismatch");
    const auto label_text = [&](std::size_t t) { return y ? data.labels.name(static_cast<std::size_t>((*y)[t])) : std::string("?"); };
    if (data.kind == TaskKind::Classification) {
      out << label_text(0);
      for (const auto& fv : inst.positions[0]) out << ' ' << data.vocabulary.name(fv.id) << ':' << format_number(fv.value);
      out << '\n';
      continue;
    }
    if (i > 0) out << '\n';
    for (std::size_t t = 0; t < inst.positions.size(); ++t) {
      for (const auto& fv : inst.positions[t]) {
        const long repeats = std::max(1L, std::lround(fv.value));
        for (long r = 0; r < repeats; ++r) out << data.vocabulary.name(fv.id) << '\t';
      }
      out << label_text(t) << '\n';
    }
  }
}

std::string to_string(const Dataset& data) {
  std::ostringstream out;
  write_dataset(out, data);
  return out.str();
}

}  // namespace altproj
