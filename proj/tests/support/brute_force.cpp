#include "support/brute_force.hpp"

#include <algorithm>
#include <numeric>

namespace ause::testing {

namespace {

std::vector<std::size_t> relevant_points(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                                         ClassIndex ignore_index) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] != ignore_index && (gt[i] == c || pred[i] == c)) out.push_back(i);
  }
  return out;
}

double error_of_remaining(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                          const std::vector<std::size_t>& remaining) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i : remaining) {
    const bool is_gt = gt[i] == c;
    const bool is_pred = pred[i] == c;
    if (is_gt && is_pred) ++tp;
    else if (is_pred) ++fp;
    else if (is_gt) ++fn;
  }
  if (tp + fp + fn == 0) return 0.0;
  return 1.0 - static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
}

}  // namespace

std::vector<double> removal_error_curve(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                                        const std::vector<std::size_t>& relevant,
                                        const std::vector<std::size_t>& order) {
  std::vector<double> curve;
  for (std::size_t m = 0; m < order.size(); ++m) {
    std::vector<bool> removed(relevant.size(), false);
    for (std::size_t r = 0; r < m; ++r) removed[order[r]] = true;
    std::vector<std::size_t> remaining;
    for (std::size_t r = 0; r < relevant.size(); ++r) {
      if (!removed[r]) remaining.push_back(relevant[r]);
    }
    curve.push_back(error_of_remaining(pred, gt, c, remaining));
  }
  return curve;
}

BruteForceCurves brute_force_curves(const LabelArray& pred, const LabelArray& gt,
                                    const ConfidenceVector& conf, ClassIndex c, ClassIndex ignore_index) {
  const auto relevant = relevant_points(pred, gt, c, ignore_index);
  if (relevant.empty()) throw Error(ErrorKind::EmptySubset, "no relevant point");
  if (relevant.size() > kBruteForceLimit) throw Error(ErrorKind::SubsetTooLarge, "relevant subset exceeds 20");
  const std::size_t n = relevant.size();

  // Insertion sort by (confidence, index): ascending, ties by position.
  std::vector<std::size_t> by_conf(n);
  std::iota(by_conf.begin(), by_conf.end(), 0);
  for (std::size_t a = 1; a < n; ++a) {
    for (std::size_t b = a; b > 0; --b) {
      const double lhs = conf.scores[relevant[by_conf[b - 1]]];
      const double rhs = conf.scores[relevant[by_conf[b]]];
      if (lhs > rhs) std::swap(by_conf[b - 1], by_conf[b]);
      else break;
    }
  }

  // Oracle order: misclassified points first, in index order, then the rest.
  std::vector<std::size_t> by_truth;
  for (std::size_t r = 0; r < n; ++r) {
    if (gt[relevant[r]] != pred[relevant[r]]) by_truth.push_back(r);
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (gt[relevant[r]] == pred[relevant[r]]) by_truth.push_back(r);
  }

  BruteForceCurves out;
  out.sparsification = removal_error_curve(pred, gt, c, relevant, by_conf);
  out.oracle = removal_error_curve(pred, gt, c, relevant, by_truth);
  double area = 0.0;
  for (std::size_t m = 0; m < n; ++m) area += out.sparsification[m] - out.oracle[m];
  out.ause = area / static_cast<double>(n);
  return out;
}

double brute_force_ause(const LabelArray& pred, const LabelArray& gt, const ConfidenceVector& conf,
                        ClassIndex c, ClassIndex ignore_index) {
  return brute_force_curves(pred, gt, conf, c, ignore_index).ause;
}

std::vector<double> minimal_curve_by_enumeration(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                                                 ClassIndex ignore_index) {
  const auto relevant = relevant_points(pred, gt, c, ignore_index);
  if (relevant.empty()) throw Error(ErrorKind::EmptySubset, "no relevant point");
  if (relevant.size() > 8) throw Error(ErrorKind::SubsetTooLarge, "enumeration is limited to n <= 8");
  std::vector<std::size_t> order(relevant.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> best(relevant.size(), 1.0);
  do {
    const auto curve = removal_error_curve(pred, gt, c, relevant, order);
    for (std::size_t m = 0; m < curve.size(); ++m) best[m] = std::min(best[m], curve[m]);
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

}  // namespace ause::testing
