#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ause/core.hpp"

namespace ause {

// k x k counts; rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() : ConfusionMatrix(0) {}
  explicit ConfusionMatrix(std::size_t k) : k_(k), counts_(k * k, 0) {}

  std::size_t k() const noexcept { return k_; }
  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * k_ + pred]; }
  void add(std::size_t gt, std::size_t pred, std::uint64_t n = 1) { counts_[gt * k_ + pred] += n; }
  std::uint64_t total() const noexcept;
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  std::uint64_t true_positives(std::size_t c) const { return at(c, c); }
  std::uint64_t false_positives(std::size_t c) const;
  std::uint64_t false_negatives(std::size_t c) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

struct IoUVector {
  std::vector<std::optional<double>> values;

  bool present(std::size_t c) const { return values[c].has_value(); }
  std::size_t size() const noexcept { return values.size(); }
};

ConfusionMatrix confusion(const LabelArray& pred, const LabelArray& gt, const ClassCatalog& catalog);
ConfusionMatrix merge(const ConfusionMatrix& a, const ConfusionMatrix& b);
IoUVector iou(const ConfusionMatrix& m);

// Mean over present classes only; throws NoPresentClasses when none is.
double miou(const IoUVector& v);
// Mean over all k classes with absent classes counted as 0.
double miou_all_classes(const IoUVector& v);

}  // namespace ause
