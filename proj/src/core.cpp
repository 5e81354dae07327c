#include "ause/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ause {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotADistribution: return "NotADistribution";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::InvalidCatalog: return "InvalidCatalog";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::MissingStddev: return "MissingStddev";
    case ErrorKind::NoPresentClasses: return "NoPresentClasses";
    case ErrorKind::EmptySubset: return "EmptySubset";
    case ErrorKind::SubsetTooLarge: return "SubsetTooLarge";
    case ErrorKind::AllClassesFiltered: return "AllClassesFiltered";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::SpecInvalid: return "SpecInvalid";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::BadHeader: return "BadHeader";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::UnknownClass: return "UnknownClass";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::optional<std::size_t> index)
    : std::runtime_error(message), kind_(kind), index_(index) {}

ClassCatalog::ClassCatalog(std::vector<std::string> names, ClassIndex ignore_index)
    : names_(std::move(names)), ignore_index_(ignore_index) {
  if (names_.size() < 2) {
    throw Error(ErrorKind::InvalidCatalog, "catalog needs at least 2 classes");
  }
  std::set<std::string_view> seen;
  for (std::size_t c = 0; c < names_.size(); ++c) {
    if (!seen.insert(names_[c]).second) {
      throw Error(ErrorKind::InvalidCatalog, "duplicate class name '" + names_[c] + "'", c);
    }
  }
  if (ignore_index_ >= 0 && static_cast<std::size_t>(ignore_index_) < names_.size()) {
    throw Error(ErrorKind::InvalidCatalog,
                "ignore_index " + std::to_string(ignore_index_) + " collides with an evaluated class");
  }
}

std::optional<std::size_t> ClassCatalog::find(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

ProbabilityStack::ProbabilityStack(std::size_t samples, std::size_t points, std::size_t classes,
                                   std::vector<float> data)
    : samples_(samples), points_(points), classes_(classes), data_(std::move(data)) {
  if (data_.size() != samples_ * points_ * classes_) {
    throw Error(ErrorKind::DimensionMismatch,
                "probability buffer holds " + std::to_string(data_.size()) + " values, expected " +
                    std::to_string(samples_ * points_ * classes_));
  }
}

std::string_view to_string(ConfidenceMeasure measure) {
  return measure == ConfidenceMeasure::MaxSoftmax ? "softmax" : "entropy";
}

std::optional<ConfidenceMeasure> parse_measure(std::string_view text) {
  if (text == "softmax") return ConfidenceMeasure::MaxSoftmax;
  if (text == "entropy") return ConfidenceMeasure::NegEntropy;
  return std::nullopt;
}

std::string_view to_string(TieBreak tie_break) {
  return tie_break == TieBreak::StableIndex ? "stable_index" : "seeded_random";
}

std::string_view to_string(RankingDomain domain) {
  return domain == RankingDomain::Subset ? "subset" : "global";
}

std::optional<TieBreak> parse_tie_break(std::string_view text) {
  if (text == "stable_index" || text == "stable") return TieBreak::StableIndex;
  if (text == "seeded_random" || text == "seeded") return TieBreak::SeededRandom;
  return std::nullopt;
}

std::optional<RankingDomain> parse_ranking_domain(std::string_view text) {
  if (text == "subset") return RankingDomain::Subset;
  if (text == "global") return RankingDomain::Global;
  return std::nullopt;
}

void EvalConfig::validate() const {
  if (grid_steps < 2) {
    throw Error(ErrorKind::InvalidConfig, "grid_steps must be >= 2");
  }
  if (!(iou_filter_threshold >= 0.0 && iou_filter_threshold < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "iou_filter_threshold must lie in [0, 1)");
  }
  if (ece_bins < 1) {
    throw Error(ErrorKind::InvalidConfig, "ece_bins must be >= 1");
  }
  if (measures.empty()) {
    throw Error(ErrorKind::InvalidConfig, "at least one confidence measure is required");
  }
  for (std::size_t i = 0; i < measures.size(); ++i) {
    for (std::size_t j = i + 1; j < measures.size(); ++j) {
      if (measures[i] == measures[j]) {
        throw Error(ErrorKind::InvalidConfig, "duplicate confidence measure");
      }
    }
  }
  if (threads < 1) {
    throw Error(ErrorKind::InvalidConfig, "threads must be >= 1");
  }
}

void check_probabilities(const ProbabilityStack& probs, std::size_t k) {
  if (probs.samples() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "probability stack has no samples");
  }
  if (probs.classes() != k) {
    throw Error(ErrorKind::DimensionMismatch, "probability stack has " + std::to_string(probs.classes()) +
                                                  " classes, catalog has " + std::to_string(k));
  }
  for (std::size_t s = 0; s < probs.samples(); ++s) {
    for (std::size_t i = 0; i < probs.points(); ++i) {
      double sum = 0.0;
      for (float p : probs.row(s, i)) {
        if (!std::isfinite(p)) {
          throw Error(ErrorKind::NonFiniteInput, "non-finite probability at point " + std::to_string(i), i);
        }
        if (p < 0.0f || p > 1.0f) {
          throw Error(ErrorKind::NotADistribution,
                      "probability outside [0,1] at point " + std::to_string(i), i);
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw Error(ErrorKind::NotADistribution,
                    "row sum " + std::to_string(sum) + " at point " + std::to_string(i), i);
      }
    }
  }
}

void check_labels(const LabelArray& labels, const ClassCatalog& catalog) {
  const auto k = static_cast<ClassIndex>(catalog.k());
  const ClassIndex ignore = catalog.ignore_index();
  auto values = labels.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const ClassIndex v = values[i];
    if (v != ignore && (v < 0 || v >= k)) {
      throw Error(ErrorKind::LabelOutOfRange,
                  "label " + std::to_string(v) + " at point " + std::to_string(i), i);
    }
  }
}

EvalBundle validate_inputs(ProbabilityStack probs, LabelArray gt, const ClassCatalog& catalog) {
  if (gt.size() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "label array is empty");
  }
  if (probs.points() != gt.size()) {
    throw Error(ErrorKind::DimensionMismatch, "probabilities cover " + std::to_string(probs.points()) +
                                                  " points, labels cover " + std::to_string(gt.size()));
  }
  check_probabilities(probs, catalog.k());
  check_labels(gt, catalog);
  return EvalBundle{catalog, std::move(probs), std::move(gt)};
}

}  // namespace ause
