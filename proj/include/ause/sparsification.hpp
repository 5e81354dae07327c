#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ause/core.hpp"

namespace ause {

// Removal fractions j / steps for j = 0 .. steps-1.
class FractionGrid {
 public:
  explicit FractionGrid(std::size_t steps);

  std::size_t size() const noexcept { return steps_; }
  double fraction(std::size_t j) const { return static_cast<double>(j) / static_cast<double>(steps_); }
  // floor(f_j * n), computed in integers.
  std::size_t removal_count(std::size_t j, std::size_t n) const { return j * n / steps_; }

 private:
  std::size_t steps_;
};

struct CurvePair {
  std::size_t class_index = 0;
  std::size_t grid_steps = 0;
  std::vector<double> sparsification_error;
  std::vector<double> oracle_error;
  std::size_t relevant_count = 0;
};

struct RankingOptions {
  TieBreak tie_break = TieBreak::StableIndex;
  std::uint64_t seed = 0;
};

// Indices with gt == c or pred == c; points whose gt is the ignore label are
// never included.
std::vector<std::size_t> relevant_subset(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                                         ClassIndex ignore_index = kDefaultIgnoreIndex);

// Error 1 - IoU_c on the relevant subset after removing the floor(f_j * n)
// least confident relevant points. Throws EmptySubset.
std::vector<double> sparsification_curve(const LabelArray& pred, const LabelArray& gt,
                                         const ConfidenceVector& conf, ClassIndex c,
                                         const FractionGrid& grid, RankingOptions ranking = {},
                                         ClassIndex ignore_index = kDefaultIgnoreIndex);

// Same error under the ground-truth-optimal order (all misclassified relevant
// points first). Throws EmptySubset.
std::vector<double> oracle_curve(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                                 const FractionGrid& grid,
                                 ClassIndex ignore_index = kDefaultIgnoreIndex);

CurvePair class_curves(const LabelArray& pred, const LabelArray& gt, const ConfidenceVector& conf,
                       ClassIndex c, const FractionGrid& grid, RankingOptions ranking = {},
                       ClassIndex ignore_index = kDefaultIgnoreIndex);

// Rectangle-rule area between the two curves.
double ause(const CurvePair& curves);

struct ClassAuse {
  std::size_t class_index = 0;
  std::optional<double> ause;  // empty when the class has no relevant point
  std::size_t relevant_count = 0;
  std::optional<CurvePair> curves;
};

std::vector<ClassAuse> per_class_ause(const ProbabilityStack& probs, const LabelArray& gt,
                                      const ClassCatalog& catalog, ConfidenceMeasure measure,
                                      const EvalConfig& config);

// Variant over precomputed predictions and confidences; `pred` must hold the
// argmax of the distribution the confidences were derived from.
std::vector<ClassAuse> per_class_ause(const LabelArray& pred, const LabelArray& gt,
                                      const ConfidenceVector& conf, const ClassCatalog& catalog,
                                      const EvalConfig& config);

}  // namespace ause
