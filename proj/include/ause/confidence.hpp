#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ause/core.hpp"

namespace ause {

// N x K logits, optionally with a per-logit Gaussian scale of the same shape.
class LogitTensor {
 public:
  LogitTensor(std::size_t points, std::size_t classes, std::vector<float> values,
              std::optional<std::vector<float>> stddev = std::nullopt);

  std::size_t points() const noexcept { return points_; }
  std::size_t classes() const noexcept { return classes_; }
  bool has_stddev() const noexcept { return stddev_.has_value(); }

  std::span<const float> row(std::size_t point) const {
    return {values_.data() + point * classes_, classes_};
  }
  std::span<const float> stddev_row(std::size_t point) const {
    return {stddev_->data() + point * classes_, classes_};
  }

 private:
  std::size_t points_;
  std::size_t classes_;
  std::vector<float> values_;
  std::optional<std::vector<float>> stddev_;
};

ProbabilityStack softmax(const LogitTensor& logits);

// Sample s is softmax(mean + stddev * z_s) with z drawn from a counter-based
// generator keyed by (seed, point, class, sample).
ProbabilityStack sample_probabilistic_logits(const LogitTensor& logits, std::size_t samples,
                                             std::uint64_t seed);

// Mean over the sample axis.
ProbabilityStack aggregate_samples(const ProbabilityStack& stack);

std::pair<ConfidenceVector, LabelArray> max_softmax_confidence(const ProbabilityStack& probs);

// 1 - H(p) / log(k); base-free since the log base cancels.
ConfidenceVector entropy_confidence(const ProbabilityStack& probs);

// Per-row kernels shared with the pipeline's streaming path.
namespace detail {
double normalized_entropy_confidence(std::span<const float> row);
std::size_t argmax(std::span<const float> row);
}  // namespace detail

}  // namespace ause
