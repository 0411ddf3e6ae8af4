#ifndef ALTPROJ_CHECKPOINT_HPP
#define ALTPROJ_CHECKPOINT_HPP

// Self-contained model files: label and feature tables plus parameters, all
// numbers written in shortest round-trip form so reloading is bit-exact.

#include <iosfwd>
#include <map>
#include <string>

#include "altproj/dataset.hpp"
#include "altproj/types.hpp"

namespace altproj {

struct Checkpoint {
  TaskKind task = TaskKind::Classification;
  Interner labels;
  Interner vocabulary;
  ParamVector lambda;
  Eigen::VectorXd mu;
  int iteration = 0;
  // Free-form training settings, echoed for provenance of the run.
  std::map<std::string, std::string> settings;

  ModelShape shape() const { return lambda.shape; }
  /// Empty dataset carrying this checkpoint's tables, ready for frozen reads.
  Dataset empty_dataset() const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace altproj

#endif  // ALTPROJ_CHECKPOINT_HPP
