#include "ause/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "ause/confidence.hpp"
#include "ause/parallel.hpp"
#include "ause/random.hpp"

namespace ause {

std::optional<std::size_t> EvalReport::measure_slot(ConfidenceMeasure m) const {
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (measures[i] == m) return i;
  }
  return std::nullopt;
}

namespace {

bool wants(const EvalConfig& config, ConfidenceMeasure m) {
  return std::find(config.measures.begin(), config.measures.end(), m) != config.measures.end();
}

std::uint64_t frame_seed(std::uint64_t seed, const std::string& id) {
  return hash_key({seed, io::fnv1a64(std::as_bytes(std::span(id.data(), id.size())))});
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Flags rows against `threshold` and recomputes both aggregates. Returns
// false when every row ends up filtered.
bool apply_filter(EvalReport& report, double threshold) {
  bool any_kept = false;
  for (auto& row : report.rows) {
    row.filtered = !row.iou || *row.iou < threshold;
    any_kept = any_kept || !row.filtered;
  }
  report.aggregates.assign(report.measures.size(), {});
  for (std::size_t m = 0; m < report.measures.size(); ++m) {
    std::vector<double> all, kept;
    for (const auto& row : report.rows) {
      if (!row.ause[m]) continue;
      all.push_back(*row.ause[m]);
      if (!row.filtered) kept.push_back(*row.ause[m]);
    }
    report.aggregates[m] = {mean_of(all), mean_of(kept)};
  }
  report.provenance.config.iou_filter_threshold = threshold;
  return any_kept;
}

}  // namespace

FrameSummary summarize_frame(std::string id, const ProbabilityStack& probs, const LabelArray& gt,
                             const ClassCatalog& catalog, const EvalConfig& config) {
  if (gt.size() < 1 || probs.points() != gt.size()) {
    throw Error(ErrorKind::DimensionMismatch, "frame '" + id + "': probabilities and labels disagree on N");
  }
  check_probabilities(probs, catalog.k());
  check_labels(gt, catalog);

  const ProbabilityStack aggregated = probs.samples() == 1 ? ProbabilityStack{} : aggregate_samples(probs);
  const ProbabilityStack& dist = probs.samples() == 1 ? probs : aggregated;
  const bool with_entropy = wants(config, ConfidenceMeasure::NegEntropy);

  FrameSummary out;
  out.id = id;
  out.confusion = ConfusionMatrix(catalog.k());
  out.digest.id = std::move(id);
  const ClassIndex ignore = catalog.ignore_index();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore) {
      ++out.ignored;
      continue;
    }
    auto row = dist.row(0, i);
    const std::size_t best = detail::argmax(row);
    out.pred.push_back(static_cast<ClassIndex>(best));
    out.gt.push_back(gt[i]);
    out.softmax.push_back(row[best]);
    if (with_entropy) out.entropy.push_back(detail::normalized_entropy_confidence(row));
    out.confusion.add(static_cast<std::size_t>(gt[i]), best);
  }
  return out;
}

FrameSummary summarize_frame(const io::LoadedFrame& frame, const ClassCatalog& catalog,
                             const EvalConfig& config) {
  FrameSummary out;
  if (const auto* probs = std::get_if<ProbabilityStack>(&frame.prediction)) {
    out = summarize_frame(frame.id, *probs, frame.labels, catalog, config);
  } else {
    const auto& logits = std::get<LogitTensor>(frame.prediction);
    const auto sampled = logits.has_stddev()
                             ? sample_probabilistic_logits(logits, frame.logit_samples,
                                                           frame_seed(config.rng_seed, frame.id))
                             : softmax(logits);
    out = summarize_frame(frame.id, sampled, frame.labels, catalog, config);
  }
  out.digest.prediction = frame.prediction_digest;
  out.digest.labels = frame.labels_digest;
  return out;
}

SplitAccumulator::SplitAccumulator(ClassCatalog catalog, EvalConfig config)
    : catalog_(std::move(catalog)), config_(std::move(config)), confusion_(catalog_.k()) {
  config_.validate();
}

void SplitAccumulator::add(FrameSummary frame) {
  if (frame.confusion.k() != catalog_.k()) {
    throw Error(ErrorKind::DimensionMismatch, "frame '" + frame.id + "' was summarized with another catalog");
  }
  const bool with_entropy = wants(config_, ConfidenceMeasure::NegEntropy);
  if (with_entropy && frame.entropy.size() != frame.gt.size()) {
    throw Error(ErrorKind::DimensionMismatch, "frame '" + frame.id + "' lacks entropy confidences");
  }
  frame_offsets_.push_back(gt_.size());
  pred_.insert(pred_.end(), frame.pred.begin(), frame.pred.end());
  gt_.insert(gt_.end(), frame.gt.begin(), frame.gt.end());
  softmax_.insert(softmax_.end(), frame.softmax.begin(), frame.softmax.end());
  if (with_entropy) entropy_.insert(entropy_.end(), frame.entropy.begin(), frame.entropy.end());
  confusion_ += frame.confusion;
  ignored_ += frame.ignored;
  digests_.push_back(std::move(frame.digest));
}

void SplitAccumulator::add_frame(std::string id, const ProbabilityStack& probs, const LabelArray& gt) {
  add(summarize_frame(std::move(id), probs, gt, catalog_, config_));
}

ConfidenceVector SplitAccumulator::confidence(ConfidenceMeasure measure) const {
  if (measure == ConfidenceMeasure::MaxSoftmax) return {measure, softmax_};
  if (!wants(config_, measure)) {
    throw Error(ErrorKind::InvalidConfig, "entropy confidence was not requested for this split");
  }
  return {measure, entropy_};
}

CurvePair SplitAccumulator::curves(std::size_t class_index, ConfidenceMeasure measure) const {
  if (class_index >= catalog_.k()) {
    throw Error(ErrorKind::UnknownClass, "class index " + std::to_string(class_index), class_index);
  }
  auto per_class = per_class_ause(predictions(), ground_truth(), confidence(measure), catalog_, config_);
  if (!per_class[class_index].curves) {
    throw Error(ErrorKind::EmptySubset, "class '" + catalog_.name(class_index) + "' has no relevant point",
                class_index);
  }
  return *per_class[class_index].curves;
}

double SplitAccumulator::ece() const {
  return ause::ece(softmax_, pred_, gt_, config_.ece_bins);
}

EvalReport SplitAccumulator::finish() const {
  if (digests_.empty()) throw Error(ErrorKind::EmptySplit, "split contains no frame");
  if (gt_.empty()) throw Error(ErrorKind::EmptySplit, "every point of the split is ignored");

  EvalReport report;
  report.ignore_index = catalog_.ignore_index();
  report.measures = config_.measures;
  report.point_count = gt_.size();
  report.ignored_count = ignored_;
  report.confusion = confusion_;
  report.provenance.config = config_;
  report.provenance.frames = digests_;

  const IoUVector ious = iou(confusion_);
  report.miou_all = miou_all_classes(ious);
  try {
    report.miou_present = miou(ious);
  } catch (const Error&) {
    report.miou_present = std::nullopt;
  }
  report.ece = ece();

  const LabelArray pred(pred_), gt(gt_);
  report.rows.resize(catalog_.k());
  for (std::size_t c = 0; c < catalog_.k(); ++c) {
    auto& row = report.rows[c];
    row.name = catalog_.name(c);
    row.class_index = c;
    row.iou = ious.values[c];
    row.ause.assign(report.measures.size(), std::nullopt);
  }
  for (std::size_t m = 0; m < report.measures.size(); ++m) {
    const auto per_class = per_class_ause(pred, gt, confidence(report.measures[m]), catalog_, config_);
    for (const auto& entry : per_class) {
      report.rows[entry.class_index].ause[m] = entry.ause;
      report.rows[entry.class_index].relevant_count = entry.relevant_count;
    }
  }

  if (config_.per_frame) {
    report.per_frame_ause.assign(report.measures.size(), std::vector<std::optional<double>>(catalog_.k()));
    for (std::size_t m = 0; m < report.measures.size(); ++m) {
      const auto& scores = report.measures[m] == ConfidenceMeasure::MaxSoftmax ? softmax_ : entropy_;
      std::vector<std::vector<double>> per_class_values(catalog_.k());
      for (std::size_t f = 0; f < frame_offsets_.size(); ++f) {
        const std::size_t begin = frame_offsets_[f];
        const std::size_t end = f + 1 < frame_offsets_.size() ? frame_offsets_[f + 1] : gt_.size();
        if (begin == end) continue;
        const LabelArray fp(std::vector<ClassIndex>(pred_.begin() + begin, pred_.begin() + end));
        const LabelArray fg(std::vector<ClassIndex>(gt_.begin() + begin, gt_.begin() + end));
        const ConfidenceVector fc{report.measures[m],
                                  std::vector<double>(scores.begin() + begin, scores.begin() + end)};
        for (const auto& entry : per_class_ause(fp, fg, fc, catalog_, config_)) {
          if (entry.ause) per_class_values[entry.class_index].push_back(*entry.ause);
        }
      }
      for (std::size_t c = 0; c < catalog_.k(); ++c) report.per_frame_ause[m][c] = mean_of(per_class_values[c]);
    }
  }

  apply_filter(report, config_.iou_filter_threshold);
  return report;
}

SplitAccumulator accumulate_split(const io::Manifest& manifest, const EvalConfig& config) {
  config.validate();
  if (manifest.frames.empty()) throw Error(ErrorKind::EmptySplit, "manifest lists no frame");
  SplitAccumulator acc(manifest.catalog, config);
  // Frames are summarized in parallel batches and appended in manifest order.
  const std::size_t batch = std::max(1u, config.threads);
  for (std::size_t start = 0; start < manifest.frames.size(); start += batch) {
    const std::size_t count = std::min(batch, manifest.frames.size() - start);
    std::vector<FrameSummary> summaries(count);
    parallel_for(count, config.threads, [&](std::size_t i) {
      const auto frame = io::load_frame(manifest.frames[start + i], manifest.catalog, manifest.base_dir);
      summaries[i] = summarize_frame(frame, manifest.catalog, config);
    });
    for (auto& s : summaries) acc.add(std::move(s));
  }
  return acc;
}

EvalReport evaluate_split(const io::Manifest& manifest, const EvalConfig& config) {
  return accumulate_split(manifest, config).finish();
}

EvalReport filter_and_aggregate(const EvalReport& report, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "filter threshold must lie in [0, 1)");
  }
  EvalReport out = report;
  if (!apply_filter(out, threshold)) {
    throw Error(ErrorKind::AllClassesFiltered, "every class falls below the IoU threshold");
  }
  return out;
}

double ece(std::span<const double> confidence, std::span<const ClassIndex> pred,
           std::span<const ClassIndex> gt, std::size_t bins) {
  if (bins < 1) throw Error(ErrorKind::InvalidConfig, "ece needs at least one bin");
  if (confidence.size() != pred.size() || pred.size() != gt.size()) {
    throw Error(ErrorKind::DimensionMismatch, "ece inputs differ in length");
  }
  if (confidence.empty()) return 0.0;
  std::vector<double> conf_sum(bins, 0.0);
  std::vector<std::uint64_t> correct(bins, 0), count(bins, 0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    // Bin b covers (b/B, (b+1)/B]; zero joins the first bin.
    const double scaled = std::ceil(confidence[i] * static_cast<double>(bins)) - 1.0;
    const auto b = static_cast<std::size_t>(std::clamp(scaled, 0.0, static_cast<double>(bins - 1)));
    conf_sum[b] += confidence[i];
    correct[b] += pred[i] == gt[i];
    ++count[b];
  }
  const auto total = static_cast<double>(confidence.size());
  double out = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const auto n = static_cast<double>(count[b]);
    out += (n / total) * std::abs(static_cast<double>(correct[b]) / n - conf_sum[b] / n);
  }
  return out;
}

double ece(const ProbabilityStack& probs, const LabelArray& gt, std::size_t bins, ClassIndex ignore_index) {
  const auto dist = aggregate_samples(probs);
  if (dist.points() != gt.size()) {
    throw Error(ErrorKind::DimensionMismatch, "probabilities and labels disagree on N");
  }
  auto [conf, pred] = max_softmax_confidence(dist);
  std::vector<double> c;
  std::vector<ClassIndex> p, g;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_index) continue;
    c.push_back(conf.scores[i]);
    p.push_back(pred[i]);
    g.push_back(gt[i]);
  }
  return ece(c, p, g, bins);
}

ScatterExport scatter_export(const EvalReport& report) {
  ScatterExport out;
  out.threshold = report.provenance.config.iou_filter_threshold;
  for (std::size_t m = 0; m < report.measures.size(); ++m) {
    for (const auto& row : report.rows) {
      if (!row.iou || !row.ause[m]) continue;
      out.points.push_back({report.measures[m], row.name, row.class_index, *row.iou, *row.ause[m],
                            *row.iou < out.threshold});
    }
  }
  return out;
}

}  // namespace ause
