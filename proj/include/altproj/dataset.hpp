#ifndef ALTPROJ_DATASET_HPP
#define ALTPROJ_DATASET_HPP

// Text formats for pre-extracted features.
//
// Classification, one instance per line:
//   <label or ?> <feature>:<value> ...
// Sequences, one token per line, sequences separated by blank lines:
//   <feature>\t<feature>\t...\t<label or ?>
// Sequence features are binary; a feature repeated on a token counts twice.

#include <iosfwd>
#include <string>
#include <vector>

#include "altproj/types.hpp"

namespace altproj {

enum class TaskKind { Classification, Sequence };

const char* task_name(TaskKind kind);
TaskKind parse_task(const std::string& name);

struct Dataset {
  TaskKind kind = TaskKind::Classification;
  // Classification instances are stored as sequences of length one.
  std::vector<SequenceInstance> labeled;
  std::vector<SequenceInstance> unlabeled;
  // File order: (is_labeled, index into labeled/unlabeled).
  std::vector<std::pair<bool, std::size_t>> order;
  Interner vocabulary;
  Interner labels;

  ModelShape shape() const;
  LabelSpace label_space() const;
  std::size_t size() const { return order.size(); }
  const SequenceInstance& at(std::size_t i) const;
  void add(SequenceInstance inst);
};

struct ReadOptions {
  // Unknown features are dropped instead of interned.
  bool freeze_vocabulary = false;
  // Unknown labels are a parse error instead of interned.
  bool freeze_labels = false;
};

/// Appends the instances of `in` to `data`, interning names into its tables.
void read_classification(std::istream& in, Dataset& data, const ReadOptions& options = {});
void read_sequences(std::istream& in, Dataset& data, const ReadOptions& options = {});
/// Dispatches on data.kind. Throws Error when the file cannot be opened.
void read_file(const std::string& path, Dataset& data, const ReadOptions& options = {});

/// Canonical text: file order, features sorted by id, shortest round-trip
/// numbers. Gold labels may be replaced by `predictions` (one per instance in
/// file order).
void write_dataset(std::ostream& out, const Dataset& data,
                   const std::vector<LabelSequence>* predictions = nullptr);
std::string to_string(const Dataset& data);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double x);
/// Parses a finite double, all of `text`; throws ParseError with `line`.
double parse_number(std::string_view text, std::size_t line);

}  // namespace altproj

#endif  // ALTPROJ_DATASET_HPP
