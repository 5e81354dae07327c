#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ause {

using ClassIndex = std::int32_t;

inline constexpr ClassIndex kDefaultIgnoreIndex = 255;
inline constexpr double kRowSumTolerance = 1e-5;

enum class ErrorKind {
  DimensionMismatch,
  NotADistribution,
  LabelOutOfRange,
  InvalidCatalog,
  InvalidConfig,
  NonFiniteInput,
  MissingStddev,
  NoPresentClasses,
  EmptySubset,
  SubsetTooLarge,
  AllClassesFiltered,
  EmptySplit,
  SpecInvalid,
  BadMagic,
  BadHeader,
  ChecksumMismatch,
  TruncatedFile,
  ShapeMismatch,
  IoFailure,
  UnknownClass,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type. `index` carries the
// first offending point (or class) when one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> index_;
};

class ClassCatalog {
 public:
  explicit ClassCatalog(std::vector<std::string> names,
                        ClassIndex ignore_index = kDefaultIgnoreIndex);

  std::size_t k() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t c) const { return names_.at(c); }
  ClassIndex ignore_index() const noexcept { return ignore_index_; }
  std::optional<std::size_t> find(std::string_view name) const;

  bool operator==(const ClassCatalog&) const = default;

 private:
  std::vector<std::string> names_;
  ClassIndex ignore_index_;
};

class LabelArray {
 public:
  LabelArray() = default;
  explicit LabelArray(std::vector<ClassIndex> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  ClassIndex operator[](std::size_t i) const { return values_[i]; }
  std::span<const ClassIndex> values() const noexcept { return values_; }
  std::vector<ClassIndex>& mutable_values() noexcept { return values_; }

  bool operator==(const LabelArray&) const = default;

 private:
  std::vector<ClassIndex> values_;
};

// S x N x K class probabilities, row-major (sample, point, class).
class ProbabilityStack {
 public:
  ProbabilityStack() = default;
  ProbabilityStack(std::size_t samples, std::size_t points, std::size_t classes,
                   std::vector<float> data);

  std::size_t samples() const noexcept { return samples_; }
  std::size_t points() const noexcept { return points_; }
  std::size_t classes() const noexcept { return classes_; }

  std::span<const float> row(std::size_t sample, std::size_t point) const {
    return {data_.data() + (sample * points_ + point) * classes_, classes_};
  }
  std::span<float> mutable_row(std::size_t sample, std::size_t point) {
    return {data_.data() + (sample * points_ + point) * classes_, classes_};
  }
  std::span<const float> data() const noexcept { return data_; }

  bool operator==(const ProbabilityStack&) const = default;

 private:
  std::size_t samples_ = 0;
  std::size_t points_ = 0;
  std::size_t classes_ = 0;
  std::vector<float> data_;
};

enum class ConfidenceMeasure { MaxSoftmax, NegEntropy };

std::string_view to_string(ConfidenceMeasure measure);
std::optional<ConfidenceMeasure> parse_measure(std::string_view text);

struct ConfidenceVector {
  ConfidenceMeasure measure = ConfidenceMeasure::MaxSoftmax;
  std::vector<double> scores;

  std::size_t size() const noexcept { return scores.size(); }
};

enum class TieBreak { StableIndex, SeededRandom };
enum class RankingDomain { Subset, Global };

std::string_view to_string(TieBreak tie_break);
std::string_view to_string(RankingDomain domain);
std::optional<TieBreak> parse_tie_break(std::string_view text);
std::optional<RankingDomain> parse_ranking_domain(std::string_view text);

struct EvalConfig {
  std::size_t grid_steps = 100;
  double iou_filter_threshold = 0.03;
  std::size_t ece_bins = 15;
  TieBreak tie_break = TieBreak::StableIndex;
  std::uint64_t rng_seed = 0;
  RankingDomain ranking_domain = RankingDomain::Subset;
  std::vector<ConfidenceMeasure> measures = {ConfidenceMeasure::MaxSoftmax,
                                             ConfidenceMeasure::NegEntropy};
  bool per_frame = false;
  // Worker count; never affects results.
  unsigned threads = 1;

  void validate() const;

  bool operator==(const EvalConfig&) const = default;
};

struct EvalBundle {
  ClassCatalog catalog;
  ProbabilityStack probs;
  LabelArray gt;
};

// Throws Error(NotADistribution / LabelOutOfRange / DimensionMismatch /
// NonFiniteInput) naming the first offending point.
void check_probabilities(const ProbabilityStack& probs, std::size_t k);
void check_labels(const LabelArray& labels, const ClassCatalog& catalog);

EvalBundle validate_inputs(ProbabilityStack probs, LabelArray gt, const ClassCatalog& catalog);

}  // namespace ause
