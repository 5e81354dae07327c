#include "ause/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "ause/random.hpp"

namespace ause {

LogitTensor::LogitTensor(std::size_t points, std::size_t classes, std::vector<float> values,
                         std::optional<std::vector<float>> stddev)
    : points_(points), classes_(classes), values_(std::move(values)), stddev_(std::move(stddev)) {
  if (values_.size() != points_ * classes_) {
    throw Error(ErrorKind::DimensionMismatch, "logit buffer does not match N x K");
  }
  if (stddev_) {
    if (stddev_->size() != values_.size()) {
      throw Error(ErrorKind::DimensionMismatch, "stddev shape differs from logits");
    }
    for (std::size_t i = 0; i < stddev_->size(); ++i) {
      const float s = (*stddev_)[i];
      if (!std::isfinite(s) || s < 0.0f) {
        throw Error(ErrorKind::NonFiniteInput, "stddev must be finite and >= 0",
                    i / std::max<std::size_t>(classes_, 1));
      }
    }
  }
}

namespace {

void softmax_row(std::span<const double> logits, std::span<float> out) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - peak);
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = static_cast<float>(std::exp(logits[c] - peak) / total);
  }
}

}  // namespace

ProbabilityStack softmax(const LogitTensor& logits) {
  const std::size_t n = logits.points();
  const std::size_t k = logits.classes();
  ProbabilityStack out(1, n, k, std::vector<float>(n * k));
  std::vector<double> buffer(k);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = logits.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (!std::isfinite(row[c])) {
        throw Error(ErrorKind::NonFiniteInput, "non-finite logit at point " + std::to_string(i), i);
      }
      buffer[c] = row[c];
    }
    softmax_row(buffer, out.mutable_row(0, i));
  }
  return out;
}

ProbabilityStack sample_probabilistic_logits(const LogitTensor& logits, std::size_t samples,
                                             std::uint64_t seed) {
  if (!logits.has_stddev()) {
    throw Error(ErrorKind::MissingStddev, "probabilistic sampling needs a stddev tensor");
  }
  if (samples < 1) {
    throw Error(ErrorKind::DimensionMismatch, "sample count must be >= 1");
  }
  const std::size_t n = logits.points();
  const std::size_t k = logits.classes();
  ProbabilityStack out(samples, n, k, std::vector<float>(samples * n * k));
  std::vector<double> buffer(k);
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      auto mean = logits.row(i);
      auto scale = logits.stddev_row(i);
      for (std::size_t c = 0; c < k; ++c) {
        if (!std::isfinite(mean[c])) {
          throw Error(ErrorKind::NonFiniteInput, "non-finite logit at point " + std::to_string(i), i);
        }
        double noise = 0.0;
        if (scale[c] != 0.0f) noise = scale[c] * standard_normal(hash_key({seed, i, c, s}));
        buffer[c] = mean[c] + noise;
      }
      softmax_row(buffer, out.mutable_row(s, i));
    }
  }
  return out;
}

ProbabilityStack aggregate_samples(const ProbabilityStack& stack) {
  if (stack.samples() < 1) {
    throw Error(ErrorKind::DimensionMismatch, "probability stack has no samples");
  }
  if (stack.samples() == 1) return stack;
  const std::size_t n = stack.points();
  const std::size_t k = stack.classes();
  const double inv = 1.0 / static_cast<double>(stack.samples());
  ProbabilityStack out(1, n, k, std::vector<float>(n * k));
  std::vector<double> acc(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t s = 0; s < stack.samples(); ++s) {
      auto row = stack.row(s, i);
      for (std::size_t c = 0; c < k; ++c) acc[c] += row[c];
    }
    auto dst = out.mutable_row(0, i);
    for (std::size_t c = 0; c < k; ++c) dst[c] = static_cast<float>(acc[c] * inv);
  }
  return out;
}

namespace detail {

std::size_t argmax(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

double normalized_entropy_confidence(std::span<const float> row) {
  double h = 0.0;
  for (float p : row) {
    if (p > 0.0f) h -= static_cast<double>(p) * std::log(static_cast<double>(p));
  }
  const double score = 1.0 - h / std::log(static_cast<double>(row.size()));
  return std::clamp(score, 0.0, 1.0);
}

}  // namespace detail

namespace {

void require_single_sample(const ProbabilityStack& probs) {
  if (probs.samples() != 1) {
    throw Error(ErrorKind::DimensionMismatch,
                "confidence needs an aggregated (S=1) distribution, got S=" + std::to_string(probs.samples()));
  }
}

}  // namespace

std::pair<ConfidenceVector, LabelArray> max_softmax_confidence(const ProbabilityStack& probs) {
  require_single_sample(probs);
  ConfidenceVector conf{ConfidenceMeasure::MaxSoftmax, std::vector<double>(probs.points())};
  std::vector<ClassIndex> pred(probs.points());
  for (std::size_t i = 0; i < probs.points(); ++i) {
    auto row = probs.row(0, i);
    const std::size_t best = detail::argmax(row);
    pred[i] = static_cast<ClassIndex>(best);
    conf.scores[i] = row[best];
  }
  return {std::move(conf), LabelArray(std::move(pred))};
}

ConfidenceVector entropy_confidence(const ProbabilityStack& probs) {
  require_single_sample(probs);
  if (probs.classes() < 2) {
    throw Error(ErrorKind::DimensionMismatch, "entropy confidence needs k >= 2");
  }
  ConfidenceVector conf{ConfidenceMeasure::NegEntropy, std::vector<double>(probs.points())};
  for (std::size_t i = 0; i < probs.points(); ++i) {
    conf.scores[i] = detail::normalized_entropy_confidence(probs.row(0, i));
  }
  return conf;
}

}  // namespace ause
