#ifndef ALTPROJ_CONSTRAINT_FILE_HPP
#define ALTPROJ_CONSTRAINT_FILE_HPP

// Constraint files: blank-line separated blocks of key=value lines, '#'
// starts a comment.
//
//   kind=word-label
//   trigger=windows
//   label=ibm
//   target=0.95
//   penalty=l2
//   beta=0.01
//
// Keys: kind, trigger, label, target, target-mode (proportion|count),
// penalty (l2|l1box|affine), beta, scope (per-instance|per-dataset),
// normalize (word-label: 1/c valued feature), negate
// (transition-on-predicate: fire where the trigger is absent).

#include <iosfwd>
#include <string>
#include <vector>

#include "altproj/constraints.hpp"
#include "altproj/dataset.hpp"

namespace altproj {

struct ParsedConstraints {
  std::vector<ConstraintSpec> specs;
  std::vector<std::string> warnings;
};

/// Resolves triggers against data.vocabulary; a trigger not in it drops the
/// block with a warning. Unknown labels are interned when `grow_labels`,
/// otherwise rejected.
ParsedConstraints parse_constraints(std::istream& in, Dataset& data, bool grow_labels);
ParsedConstraints parse_constraints_file(const std::string& path, Dataset& data, bool grow_labels);

/// Parses and scales targets on `unlabeled`; warnings from both steps are
/// collected in the returned set.
ConstraintSet load_constraints(const std::string& path, Dataset& data, std::span<const SequenceInstance> unlabeled,
                               bool grow_labels);

/// Inverse of parse_constraints for file-expressible specs.
void write_constraints(std::ostream& out, std::span<const ConstraintSpec> specs, const Dataset& data);

}  // namespace altproj

#endif  // ALTPROJ_CONSTRAINT_FILE_HPP
