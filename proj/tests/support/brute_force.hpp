#pragma once

#include <cstddef>
#include <vector>

#include "ause/core.hpp"

// Test-only reference implementations. They re-evaluate IoU from explicit
// TP/FP/FN counts after every single-point removal and share no code with the
// library's curve routines.
namespace ause::testing {

inline constexpr std::size_t kBruteForceLimit = 20;

struct BruteForceCurves {
  std::vector<double> sparsification;  // one entry per removal count 0 .. n-1
  std::vector<double> oracle;
  double ause = 0.0;
};

// Throws Error(EmptySubset) or Error(SubsetTooLarge) for more than 20
// relevant points.
BruteForceCurves brute_force_curves(const LabelArray& pred, const LabelArray& gt,
                                    const ConfidenceVector& conf, ClassIndex c,
                                    ClassIndex ignore_index = kDefaultIgnoreIndex);

double brute_force_ause(const LabelArray& pred, const LabelArray& gt, const ConfidenceVector& conf,
                        ClassIndex c, ClassIndex ignore_index = kDefaultIgnoreIndex);

// Error 1 - IoU_c of the relevant points left after removing `order[0..m)`
// for every m in 0 .. n-1; `order` lists positions into `relevant`.
std::vector<double> removal_error_curve(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                                        const std::vector<std::size_t>& relevant,
                                        const std::vector<std::size_t>& order);

// Pointwise minimum over every removal order of the relevant subset (n <= 8).
std::vector<double> minimal_curve_by_enumeration(const LabelArray& pred, const LabelArray& gt,
                                                 ClassIndex c,
                                                 ClassIndex ignore_index = kDefaultIgnoreIndex);

}  // namespace ause::testing
