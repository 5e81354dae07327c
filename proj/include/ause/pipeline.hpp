#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ause/core.hpp"
#include "ause/io.hpp"
#include "ause/segmetrics.hpp"
#include "ause/sparsification.hpp"

namespace ause {

inline constexpr std::string_view kToolVersion = "ause 1.0.0";

struct ClassRow {
  std::string name;
  std::size_t class_index = 0;
  std::optional<double> iou;
  std::vector<std::optional<double>> ause;  // one entry per report measure
  std::size_t relevant_count = 0;
  bool filtered = false;

  bool operator==(const ClassRow&) const = default;
};

struct MeasureAggregate {
  std::optional<double> overall;   // mean over classes with a defined AUSE
  std::optional<double> filtered;  // same, restricted to unfiltered classes

  bool operator==(const MeasureAggregate&) const = default;
};

struct FrameDigest {
  std::string id;
  std::uint64_t prediction = 0;
  std::uint64_t labels = 0;

  bool operator==(const FrameDigest&) const = default;
};

struct Provenance {
  EvalConfig config;
  std::vector<FrameDigest> frames;
  std::string tool_version{kToolVersion};

  bool operator==(const Provenance&) const = default;
};

struct EvalReport {
  ClassIndex ignore_index = kDefaultIgnoreIndex;
  std::vector<ConfidenceMeasure> measures;
  std::vector<ClassRow> rows;
  std::vector<MeasureAggregate> aggregates;  // aligned with measures
  std::optional<double> miou_present;
  double miou_all = 0.0;
  double ece = 0.0;
  std::uint64_t point_count = 0;
  std::uint64_t ignored_count = 0;
  ConfusionMatrix confusion;
  // Diagnostic frame-averaged AUSE, [measure][class]; empty unless per_frame.
  std::vector<std::vector<std::optional<double>>> per_frame_ause;
  Provenance provenance;

  std::optional<std::size_t> measure_slot(ConfidenceMeasure m) const;
  bool operator==(const EvalReport&) const = default;
};

// Non-ignored points of one frame, reduced to what the metrics need.
struct FrameSummary {
  std::string id;
  std::vector<ClassIndex> pred;
  std::vector<ClassIndex> gt;
  std::vector<double> softmax;
  std::vector<double> entropy;  // empty unless the entropy measure is requested
  ConfusionMatrix confusion;
  std::uint64_t ignored = 0;
  FrameDigest digest;
};

// Aggregates S samples, derives argmax predictions and the requested
// confidences, and drops ignored points.
FrameSummary summarize_frame(std::string id, const ProbabilityStack& probs, const LabelArray& gt,
                             const ClassCatalog& catalog, const EvalConfig& config);
FrameSummary summarize_frame(const io::LoadedFrame& frame, const ClassCatalog& catalog,
                             const EvalConfig& config);

// Pools frames into one logical point set in insertion order.
class SplitAccumulator {
 public:
  SplitAccumulator(ClassCatalog catalog, EvalConfig config);

  void add(FrameSummary frame);
  void add_frame(std::string id, const ProbabilityStack& probs, const LabelArray& gt);

  std::size_t frame_count() const noexcept { return digests_.size(); }
  const ConfusionMatrix& confusion() const noexcept { return confusion_; }
  LabelArray predictions() const { return LabelArray(pred_); }
  LabelArray ground_truth() const { return LabelArray(gt_); }
  ConfidenceVector confidence(ConfidenceMeasure measure) const;

  CurvePair curves(std::size_t class_index, ConfidenceMeasure measure) const;
  double ece() const;
  EvalReport finish() const;

 private:
  ClassCatalog catalog_;
  EvalConfig config_;
  std::vector<ClassIndex> pred_;
  std::vector<ClassIndex> gt_;
  std::vector<double> softmax_;
  std::vector<double> entropy_;
  std::vector<std::size_t> frame_offsets_;
  std::vector<FrameDigest> digests_;
  ConfusionMatrix confusion_;
  std::uint64_t ignored_ = 0;
};

// Loads every manifest frame (validating each) and evaluates the pooled split.
// `config` is used as given; manifest overrides are the caller's business.
EvalReport evaluate_split(const io::Manifest& manifest, const EvalConfig& config);
SplitAccumulator accumulate_split(const io::Manifest& manifest, const EvalConfig& config);

// Re-derives filtered flags and aggregates at `threshold`. Throws
// AllClassesFiltered when no class survives.
EvalReport filter_and_aggregate(const EvalReport& report, double threshold);

// Equal-width binned expected calibration error of max-softmax confidence.
double ece(const ProbabilityStack& probs, const LabelArray& gt, std::size_t bins,
           ClassIndex ignore_index = kDefaultIgnoreIndex);
double ece(std::span<const double> confidence, std::span<const ClassIndex> pred,
           std::span<const ClassIndex> gt, std::size_t bins);

struct ScatterPoint {
  ConfidenceMeasure measure = ConfidenceMeasure::MaxSoftmax;
  std::string class_name;
  std::size_t class_index = 0;
  double iou = 0.0;
  double ause = 0.0;
  bool outlier = false;
};

struct ScatterExport {
  double threshold = 0.0;  // vertical marker for plots
  std::vector<ScatterPoint> points;
};

ScatterExport scatter_export(const EvalReport& report);

}  // namespace ause
