#include "ause/segmetrics.hpp"

#include <numeric>

namespace ause {

std::uint64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
  std::uint64_t column = 0;
  for (std::size_t g = 0; g < k_; ++g) column += at(g, c);
  return column - at(c, c);
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
  std::uint64_t row = 0;
  for (std::size_t p = 0; p < k_; ++p) row += at(c, p);
  return row - at(c, c);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_) {
    throw Error(ErrorKind::DimensionMismatch, "cannot merge confusion matrices of different k");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(const LabelArray& pred, const LabelArray& gt, const ClassCatalog& catalog) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::DimensionMismatch, "prediction and ground truth lengths differ");
  }
  const auto k = static_cast<ClassIndex>(catalog.k());
  const ClassIndex ignore = catalog.ignore_index();
  ConfusionMatrix m(catalog.k());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const ClassIndex g = gt[i];
    if (g == ignore) continue;
    const ClassIndex p = pred[i];
    if (g < 0 || g >= k || p < 0 || p >= k) {
      throw Error(ErrorKind::LabelOutOfRange, "label out of range at point " + std::to_string(i), i);
    }
    m.add(static_cast<std::size_t>(g), static_cast<std::size_t>(p));
  }
  return m;
}

ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
  ConfusionMatrix out = a;
  out += b;
  return out;
}

IoUVector iou(const ConfusionMatrix& m) {
  IoUVector v;
  v.values.resize(m.k());
  for (std::size_t c = 0; c < m.k(); ++c) {
    const std::uint64_t tp = m.true_positives(c);
    const std::uint64_t denom = tp + m.false_positives(c) + m.false_negatives(c);
    if (denom > 0) v.values[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return v;
}

double miou(const IoUVector& v) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& value : v.values) {
    if (value) {
      sum += *value;
      ++count;
    }
  }
  if (count == 0) throw Error(ErrorKind::NoPresentClasses, "no class is present");
  return sum / static_cast<double>(count);
}

double miou_all_classes(const IoUVector& v) {
  if (v.values.empty()) throw Error(ErrorKind::NoPresentClasses, "empty IoU vector");
  double sum = 0.0;
  for (const auto& value : v.values) sum += value.value_or(0.0);
  return sum / static_cast<double>(v.values.size());
}

}  // namespace ause
