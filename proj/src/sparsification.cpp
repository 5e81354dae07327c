#include "ause/sparsification.hpp"

#include <algorithm>
#include <cmath>

#include "ause/confidence.hpp"
#include "ause/parallel.hpp"
#include "ause/random.hpp"

namespace ause {

FractionGrid::FractionGrid(std::size_t steps) : steps_(steps) {
  if (steps_ < 1) throw Error(ErrorKind::InvalidConfig, "fraction grid needs at least one step");
}

namespace {

struct RankedPoint {
  double score;
  std::uint64_t key;
  std::uint64_t index;
  bool true_positive;

  bool operator<(const RankedPoint& o) const {
    if (score != o.score) return score < o.score;
    if (key != o.key) return key < o.key;
    return index < o.index;
  }
};

std::uint64_t tie_key(const RankingOptions& ranking, std::size_t index) {
  return ranking.tie_break == TieBreak::SeededRandom ? hash_key({ranking.seed, index}) : 0;
}

// Error of the remaining relevant points; nothing left to misclassify is 0.
double remainder_error(std::size_t tp_remaining, std::size_t remaining) {
  if (remaining == 0) return 0.0;
  return 1.0 - static_cast<double>(tp_remaining) / static_cast<double>(remaining);
}

void check_lengths(const LabelArray& pred, const LabelArray& gt) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::DimensionMismatch, "prediction and ground truth lengths differ");
  }
}

void check_confidence(const ConfidenceVector& conf, std::size_t n) {
  if (conf.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "confidence vector length differs from point count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double s = conf.scores[i];
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
      throw Error(ErrorKind::NonFiniteInput, "confidence outside [0,1] at point " + std::to_string(i), i);
    }
  }
}

std::vector<double> curve_from_ranking(std::vector<RankedPoint>& ranked, const FractionGrid& grid) {
  std::sort(ranked.begin(), ranked.end());
  const std::size_t n = ranked.size();
  std::size_t tp_total = 0;
  for (const auto& p : ranked) tp_total += p.true_positive;

  std::vector<double> errors(grid.size());
  std::size_t removed = 0;
  std::size_t removed_tp = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const std::size_t target = grid.removal_count(j, n);
    for (; removed < target; ++removed) removed_tp += ranked[removed].true_positive;
    errors[j] = remainder_error(tp_total - removed_tp, n - removed);
  }
  return errors;
}

// Oracle removal order: `errors` misclassified relevant points, then
// `neutral` points that cannot affect IoU_c, then the true positives.
std::vector<double> oracle_from_counts(std::size_t tp, std::size_t errors, std::size_t neutral,
                                       const FractionGrid& grid) {
  const std::size_t relevant = tp + errors;
  const std::size_t domain = relevant + neutral;
  std::vector<double> out(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const std::size_t m = grid.removal_count(j, domain);
    const std::size_t removed_errors = std::min(m, errors);
    const std::size_t removed_tp = m > errors + neutral ? m - errors - neutral : 0;
    out[j] = remainder_error(tp - removed_tp, relevant - removed_errors - removed_tp);
  }
  return out;
}

std::vector<RankedPoint> rank_subset(const LabelArray& pred, const LabelArray& gt,
                                     const ConfidenceVector& conf, ClassIndex c,
                                     std::span<const std::size_t> subset, const RankingOptions& ranking) {
  std::vector<RankedPoint> ranked;
  ranked.reserve(subset.size());
  for (std::size_t i : subset) {
    ranked.push_back({conf.scores[i], tie_key(ranking, i), i, gt[i] == c && pred[i] == c});
  }
  return ranked;
}

CurvePair subset_curves(const LabelArray& pred, const LabelArray& gt, const ConfidenceVector& conf,
                        ClassIndex c, std::span<const std::size_t> subset, const FractionGrid& grid,
                        const RankingOptions& ranking) {
  auto ranked = rank_subset(pred, gt, conf, c, subset, ranking);
  std::size_t tp = 0;
  for (const auto& p : ranked) tp += p.true_positive;

  CurvePair curves;
  curves.class_index = static_cast<std::size_t>(c);
  curves.grid_steps = grid.size();
  curves.relevant_count = subset.size();
  curves.sparsification_error = curve_from_ranking(ranked, grid);
  curves.oracle_error = oracle_from_counts(tp, subset.size() - tp, 0, grid);
  return curves;
}

// One global ranking shared by all classes; a removal step drops the
// floor(f_j * N) least confident non-ignored points regardless of class.
std::vector<std::optional<CurvePair>> global_curves(const LabelArray& pred, const LabelArray& gt,
                                                    const ConfidenceVector& conf, std::size_t k,
                                                    ClassIndex ignore_index, const FractionGrid& grid,
                                                    const RankingOptions& ranking) {
  std::vector<RankedPoint> ranked;
  std::vector<std::size_t> tp(k, 0), err(k, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const ClassIndex g = gt[i];
    if (g == ignore_index) continue;
    const ClassIndex p = pred[i];
    ranked.push_back({conf.scores[i], tie_key(ranking, i), i, g == p});
    if (g == p) {
      ++tp[g];
    } else {
      ++err[g];
      ++err[p];
    }
  }
  std::sort(ranked.begin(), ranked.end());
  const std::size_t domain = ranked.size();

  std::vector<std::optional<CurvePair>> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (tp[c] + err[c] == 0) continue;
    CurvePair curves;
    curves.class_index = c;
    curves.grid_steps = grid.size();
    curves.relevant_count = tp[c] + err[c];
    curves.sparsification_error.resize(grid.size());
    curves.oracle_error = oracle_from_counts(tp[c], err[c], domain - curves.relevant_count, grid);
    out[c] = std::move(curves);
  }

  std::vector<std::size_t> removed_tp(k, 0), removed_err(k, 0);
  std::size_t removed = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const std::size_t target = grid.removal_count(j, domain);
    for (; removed < target; ++removed) {
      const std::size_t i = ranked[removed].index;
      const auto g = static_cast<std::size_t>(gt[i]);
      const auto p = static_cast<std::size_t>(pred[i]);
      if (g == p) {
        ++removed_tp[g];
      } else {
        ++removed_err[g];
        ++removed_err[p];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (!out[c]) continue;
      const std::size_t remaining = tp[c] + err[c] - removed_tp[c] - removed_err[c];
      out[c]->sparsification_error[j] = remainder_error(tp[c] - removed_tp[c], remaining);
    }
  }
  return out;
}

}  // namespace

std::vector<std::size_t> relevant_subset(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                                         ClassIndex ignore_index) {
  check_lengths(pred, gt);
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_index) continue;
    if (gt[i] == c || pred[i] == c) subset.push_back(i);
  }
  return subset;
}

CurvePair class_curves(const LabelArray& pred, const LabelArray& gt, const ConfidenceVector& conf,
                       ClassIndex c, const FractionGrid& grid, RankingOptions ranking,
                       ClassIndex ignore_index) {
  check_lengths(pred, gt);
  check_confidence(conf, gt.size());
  const auto subset = relevant_subset(pred, gt, c, ignore_index);
  if (subset.empty()) {
    throw Error(ErrorKind::EmptySubset, "class " + std::to_string(c) + " has no relevant point",
                static_cast<std::size_t>(c));
  }
  return subset_curves(pred, gt, conf, c, subset, grid, ranking);
}

std::vector<double> sparsification_curve(const LabelArray& pred, const LabelArray& gt,
                                         const ConfidenceVector& conf, ClassIndex c,
                                         const FractionGrid& grid, RankingOptions ranking,
                                         ClassIndex ignore_index) {
  return class_curves(pred, gt, conf, c, grid, ranking, ignore_index).sparsification_error;
}

std::vector<double> oracle_curve(const LabelArray& pred, const LabelArray& gt, ClassIndex c,
                                 const FractionGrid& grid, ClassIndex ignore_index) {
  const auto subset = relevant_subset(pred, gt, c, ignore_index);
  if (subset.empty()) {
    throw Error(ErrorKind::EmptySubset, "class " + std::to_string(c) + " has no relevant point",
                static_cast<std::size_t>(c));
  }
  std::size_t tp = 0;
  for (std::size_t i : subset) tp += gt[i] == pred[i];
  return oracle_from_counts(tp, subset.size() - tp, 0, grid);
}

double ause(const CurvePair& curves) {
  if (curves.sparsification_error.size() != curves.oracle_error.size() ||
      curves.sparsification_error.empty()) {
    throw Error(ErrorKind::DimensionMismatch, "curve arrays differ in length");
  }
  double area = 0.0;
  for (std::size_t j = 0; j < curves.oracle_error.size(); ++j) {
    area += curves.sparsification_error[j] - curves.oracle_error[j];
  }
  return area / static_cast<double>(curves.oracle_error.size());
}

std::vector<ClassAuse> per_class_ause(const LabelArray& pred, const LabelArray& gt,
                                      const ConfidenceVector& conf, const ClassCatalog& catalog,
                                      const EvalConfig& config) {
  config.validate();
  check_lengths(pred, gt);
  check_confidence(conf, gt.size());
  check_labels(gt, catalog);
  const std::size_t k = catalog.k();
  const ClassIndex ignore = catalog.ignore_index();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || static_cast<std::size_t>(pred[i]) >= k) {
      throw Error(ErrorKind::LabelOutOfRange, "prediction out of range at point " + std::to_string(i), i);
    }
  }
  const FractionGrid grid(config.grid_steps);
  const RankingOptions ranking{config.tie_break, config.rng_seed};

  std::vector<ClassAuse> out(k);
  for (std::size_t c = 0; c < k; ++c) out[c].class_index = c;

  auto finish = [&](std::size_t c, std::optional<CurvePair> curves) {
    if (!curves) return;
    out[c].relevant_count = curves->relevant_count;
    out[c].ause = ause(*curves);
    out[c].curves = std::move(curves);
  };

  if (config.ranking_domain == RankingDomain::Global) {
    auto curves = global_curves(pred, gt, conf, k, ignore, grid, ranking);
    for (std::size_t c = 0; c < k; ++c) finish(c, std::move(curves[c]));
    return out;
  }

  // A point belongs to the subset of its gt class and, if different, of its
  // predicted class; one pass fills every subset in index order.
  std::vector<std::vector<std::size_t>> subsets(k);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const ClassIndex g = gt[i];
    if (g == ignore) continue;
    subsets[g].push_back(i);
    if (pred[i] != g) subsets[pred[i]].push_back(i);
  }
  parallel_for(k, config.threads, [&](std::size_t c) {
    if (subsets[c].empty()) return;
    finish(c, subset_curves(pred, gt, conf, static_cast<ClassIndex>(c), subsets[c], grid, ranking));
  });
  return out;
}

std::vector<ClassAuse> per_class_ause(const ProbabilityStack& probs, const LabelArray& gt,
                                      const ClassCatalog& catalog, ConfidenceMeasure measure,
                                      const EvalConfig& config) {
  if (probs.samples() != 1) {
    throw Error(ErrorKind::DimensionMismatch, "per-class AUSE needs an aggregated (S=1) distribution");
  }
  auto bundle = validate_inputs(probs, gt, catalog);
  auto [softmax_conf, pred] = max_softmax_confidence(bundle.probs);
  if (measure == ConfidenceMeasure::MaxSoftmax) {
    return per_class_ause(pred, bundle.gt, softmax_conf, catalog, config);
  }
  return per_class_ause(pred, bundle.gt, entropy_confidence(bundle.probs), catalog, config);
}

}  // namespace ause
