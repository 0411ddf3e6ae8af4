#include "altproj/constraint_file.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

namespace altproj {

namespace {

struct Block {
  std::size_t line = 0;
  std::map<std::string, std::pair<std::string, std::size_t>> values;  // key -> (value, line)
};

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{"kind",    "trigger", "label", "target",    "target-mode",
                                          "penalty", "beta",    "scope", "normalize", "negate"};
  return keys;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<Block> read_blocks(std::istream& in) {
  std::vector<Block> blocks;
  Block current;
  std::string raw;
  std::size_t line = 0;
  const auto flush = [&]() {
    if (!current.values.empty()) blocks.push_back(std::move(current));
    current = Block{};
  };
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    const std::string body = trim(text);
    if (body.empty()) {
      // A comment-only line does not end a block.
      if (trim(raw).empty()) flush();
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value, got '" + body + "'", line);
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!known_keys().count(key)) throw ParseError("unknown key '" + key + "'", line);
    if (current.values.empty()) current.line = line;
    if (!current.values.emplace(key, std::make_pair(value, line)).second)
      throw ParseError("duplicate key '" + key + "'", line);
  }
  flush();
  return blocks;
}

bool parse_bool(const std::string& v, std::size_t line) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("expected a boolean, got '" + v + "'", line);
}

bool needs_trigger(ConstraintKind k) {
  return k == ConstraintKind::WordLabel || k == ConstraintKind::TokenLabel ||
         k == ConstraintKind::TransitionOnPredicate;
}

bool needs_label(ConstraintKind k) {
  return k == ConstraintKind::WordLabel || k == ConstraintKind::TokenLabel || k == ConstraintKind::StartLabel;
}

}  // namespace

ParsedConstraints parse_constraints(std::istream& in, Dataset& data, bool grow_labels) {
  ParsedConstraints out;
  for (const Block& block : read_blocks(in)) {
    const auto get = [&](const std::string& key) -> const std::pair<std::string, std::size_t>* {
      auto it = block.values.find(key);
      return it == block.values.end() ? nullptr : &it->second;
    };
    const auto require = [&](const std::string& key) -> const std::pair<std::string, std::size_t>& {
      if (auto* v = get(key)) return *v;
      throw ParseError("missing key '" + key + "'", block.line);
    };

    const auto& kind_text = require("kind");
    const auto kind = parse_kind(kind_text.first);
    if (!kind) throw ParseError("unknown constraint kind '" + kind_text.first + "'", kind_text.second);
    if (*kind == ConstraintKind::CustomCount)
      throw ParseError("custom-count constraints are only available through the library", kind_text.second);

    for (const char* key : {"trigger", "label"}) {
      const bool wanted = std::string(key) == "trigger" ? needs_trigger(*kind) : needs_label(*kind);
      if (!wanted && get(key)) throw ParseError(std::string("key '") + key + "' does not apply to " + kind_text.first, get(key)->second);
    }
    if (get("normalize") && *kind != ConstraintKind::WordLabel)
      throw ParseError("normalize applies to word-label only", get("normalize")->second);
    if (get("negate") && *kind != ConstraintKind::TransitionOnPredicate)
      throw ParseError("negate applies to transition-on-predicate only", get("negate")->second);

    std::size_t trigger = 0;
    if (needs_trigger(*kind)) {
      const auto& t = require("trigger");
      auto id = data.vocabulary.find(t.first);
      if (!id) {
        out.warnings.push_back("line " + std::to_string(block.line) + ": trigger '" + t.first +
                               "' does not occur in the data; constraint deactivated");
        continue;
      }
      trigger = *id;
    }
    Label label = 0;
    if (needs_label(*kind)) {
      const auto& l = require("label");
      auto id = data.labels.find(l.first);
      if (!id) {
        if (!grow_labels) throw ParseError("unknown label '" + l.first + "'", l.second);
        id = data.labels.intern(l.first);
      }
      label = static_cast<Label>(*id);
    }

    ConstraintSpec spec;
    switch (*kind) {
      case ConstraintKind::WordLabel:
        spec.feature = word_label(trigger, label, get("normalize") && parse_bool(get("normalize")->first, get("normalize")->second));
        break;
      case ConstraintKind::TokenLabel: spec.feature = token_label(trigger, label); break;
      case ConstraintKind::SelfTransition: spec.feature = self_transition(); break;
      case ConstraintKind::TransitionOnPredicate:
        spec.feature = transition_on_predicate(trigger, !(get("negate") && parse_bool(get("negate")->first, get("negate")->second)));
        break;
      case ConstraintKind::StartLabel: spec.feature = start_label(label); break;
      case ConstraintKind::RepetitionCount: spec.feature = repetition_count(); break;
      case ConstraintKind::CustomCount: break;
    }
    // Kinds that count events within one sequence default to absolute counts.
    spec.mode = spec.feature.scope == Scope::PerInstance ? TargetMode::AbsoluteCount : TargetMode::Proportion;

    if (auto* s = get("scope")) {
      if (s->first == "per-instance") spec.feature.scope = Scope::PerInstance;
      else if (s->first == "per-dataset") spec.feature.scope = Scope::PerDataset;
      else throw ParseError("unknown scope '" + s->first + "'", s->second);
    }
    if (auto* m = get("target-mode")) {
      if (m->first == "proportion") spec.mode = TargetMode::Proportion;
      else if (m->first == "count") spec.mode = TargetMode::AbsoluteCount;
      else throw ParseError("unknown target-mode '" + m->first + "'", m->second);
    }
    const auto& target = require("target");
    spec.target = parse_number(target.first, target.second);
    if (spec.mode == TargetMode::Proportion && (spec.target < 0 || spec.target > 1))
      throw ParseError("proportion target outside [0, 1]", target.second);

    if (auto* p = get("penalty")) {
      if (p->first == "l2") spec.penalty.kind = PenaltyKind::L2;
      else if (p->first == "l1box") spec.penalty.kind = PenaltyKind::L1Box;
      else if (p->first == "affine") spec.penalty.kind = PenaltyKind::Affine;
      else throw ParseError("unknown penalty '" + p->first + "'", p->second);
    }
    if (auto* b = get("beta")) {
      spec.penalty.beta = parse_number(b->first, b->second);
      try {
        validate(spec.penalty);
      } catch (const Error& e) {
        throw ParseError(e.what(), b->second);
      }
    }
    try {
      check_compatible(spec.feature, data.kind == TaskKind::Sequence);
    } catch (const Error& e) {
      throw ParseError(e.what(), kind_text.second);
    }
    out.specs.push_back(std::move(spec));
  }
  return out;
}

ParsedConstraints parse_constraints_file(const std::string& path, Dataset& data, bool grow_labels) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return parse_constraints(in, data, grow_labels);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

ConstraintSet load_constraints(const std::string& path, Dataset& data, std::span<const SequenceInstance> unlabeled,
                               bool grow_labels) {
  ParsedConstraints parsed = parse_constraints_file(path, data, grow_labels);
  ConstraintSet set = scale_targets(std::move(parsed.specs), unlabeled, data.kind == TaskKind::Sequence);
  set.warnings.insert(set.warnings.begin(), parsed.warnings.begin(), parsed.warnings.end());
  return set;
}

void write_constraints(std::ostream& out, std::span<const ConstraintSpec> specs, const Dataset& data) {
  bool first = true;
  for (const auto& spec : specs) {
    const auto& f = spec.feature;
    if (f.kind == ConstraintKind::CustomCount) throw ContractError("custom-count constraints cannot be written");
    if (!first) out << '\n';
    first = false;
    out << "kind=" << kind_name(f.kind) << '\n';
    if (needs_trigger(f.kind)) out << "trigger=" << data.vocabulary.name(f.trigger) << '\n';
    if (needs_label(f.kind)) out << "label=" << data.labels.name(static_cast<std::size_t>(f.label)) << '\n';
    if (f.kind == ConstraintKind::WordLabel && f.normalize) out << "normalize=true\n";
    if (f.kind == ConstraintKind::TransitionOnPredicate && !f.predicate_holds) out << "negate=true\n";
    out << "target=" << format_number(spec.target) << '\n';
    out << "target-mode=" << (spec.mode == TargetMode::Proportion ? "proportion" : "count") << '\n';
    out << "penalty=" << penalty_name(spec.penalty.kind) << '\n';
    if (spec.penalty.kind != PenaltyKind::Affine) out << "beta=" << format_number(spec.penalty.beta) << '\n';
    out << "scope=" << (f.scope == Scope::PerInstance ? "per-instance" : "per-dataset") << '\n';
  }
}

}  // namespace altproj
