#include <cmath>
#include <numbers>
#include <random>

#include "ause/confidence.hpp"
#include "test_helpers.hpp"

using namespace ause;
using ause::testing::expect_error;
using ause::testing::stack_from_rows;

TEST(Softmax, Examples) {
  auto p = softmax(LogitTensor(3, 2, {0.f, 0.f, static_cast<float>(std::numbers::ln2), 0.f, 1000.f, 0.f}));
  EXPECT_FLOAT_EQ(p.row(0, 0)[0], 0.5f);
  EXPECT_FLOAT_EQ(p.row(0, 0)[1], 0.5f);
  EXPECT_NEAR(p.row(0, 1)[0], 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(p.row(0, 1)[1], 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(p.row(0, 2)[0], 1.0, 1e-12);
  EXPECT_NEAR(p.row(0, 2)[1], 0.0, 1e-12);
}

TEST(Softmax, RejectsNonFinite) {
  expect_error(ErrorKind::NonFiniteInput,
               [] { softmax(LogitTensor(1, 2, {std::numeric_limits<float>::infinity(), 0.f})); });
}

TEST(LogitTensor, StddevShapeAndSign) {
  expect_error(ErrorKind::DimensionMismatch, [] { LogitTensor(1, 2, {0.f, 0.f}, std::vector<float>{1.f}); });
  expect_error(ErrorKind::NonFiniteInput, [] { LogitTensor(1, 2, {0.f, 0.f}, std::vector<float>{1.f, -1.f}); });
}

TEST(Sampling, ZeroStddevReproducesSoftmax) {
  LogitTensor logits(2, 3, {1.f, 2.f, 3.f, -1.f, 0.5f, 0.f}, std::vector<float>(6, 0.f));
  auto mean = softmax(LogitTensor(2, 3, {1.f, 2.f, 3.f, -1.f, 0.5f, 0.f}));
  auto s = sample_probabilistic_logits(logits, 5, 42);
  ASSERT_EQ(s.samples(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(s.row(k, i)[c], mean.row(0, i)[c]);
    }
  }
}

TEST(Sampling, DeterministicPerSeed) {
  LogitTensor logits(4, 3, std::vector<float>(12, 0.3f), std::vector<float>(12, 1.5f));
  EXPECT_EQ(sample_probabilistic_logits(logits, 7, 9), sample_probabilistic_logits(logits, 7, 9));
  EXPECT_NE(sample_probabilistic_logits(logits, 7, 9), sample_probabilistic_logits(logits, 7, 10));
}

TEST(Sampling, MissingStddev) {
  expect_error(ErrorKind::MissingStddev, [] { sample_probabilistic_logits(LogitTensor(1, 2, {0.f, 0.f}), 3, 1); });
}

// Symmetric logits: the class-0 probability has mean exactly 0.5. The sample
// mean of 10^5 draws must lie within 3 standard errors, with the standard
// error estimated from the same draws.
TEST(Sampling, SymmetricMonteCarloMean) {
  const std::size_t draws = 100000;
  LogitTensor logits(1, 2, {0.f, 0.f}, std::vector<float>{2.f, 2.f});
  auto s = sample_probabilistic_logits(logits, draws, 123);
  double sum = 0, sq = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    const double v = s.row(k, 0)[0];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / draws;
  const double var = sq / draws - mean * mean;
  const double se = std::sqrt(var / draws);
  EXPECT_GT(var, 0.0);
  EXPECT_LT(std::abs(mean - 0.5), 3 * se);
}

TEST(Aggregate, Examples) {
  auto two = aggregate_samples(ProbabilityStack(2, 1, 2, {1.f, 0.f, 0.f, 1.f}));
  EXPECT_EQ(two.samples(), 1u);
  EXPECT_FLOAT_EQ(two.row(0, 0)[0], 0.5f);
  EXPECT_FLOAT_EQ(two.row(0, 0)[1], 0.5f);

  auto single = stack_from_rows({{0.1f, 0.9f}, {0.6f, 0.4f}});
  EXPECT_EQ(aggregate_samples(single), single);

  const std::vector<float> p = {0.15f, 0.6f, 0.25f};
  std::vector<float> data;
  for (int s = 0; s < 30; ++s) data.insert(data.end(), p.begin(), p.end());
  auto thirty = aggregate_samples(ProbabilityStack(30, 1, 3, data));
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(thirty.row(0, 0)[c], p[c], 1e-6);
}

// Property: the aggregate is invariant to sample order and stays normalized.
TEST(Aggregate, PermutationInvariant) {
  std::mt19937_64 rng(3);
  const std::size_t S = 6, N = 20, K = 4;
  std::vector<std::vector<float>> samples(S, std::vector<float>(N * K));
  for (auto& smp : samples) {
    for (std::size_t i = 0; i < N; ++i) {
      double sum = 0;
      for (std::size_t c = 0; c < K; ++c) sum += smp[i * K + c] = std::uniform_real_distribution<float>(0.01f, 1)(rng);
      for (std::size_t c = 0; c < K; ++c) smp[i * K + c] = static_cast<float>(smp[i * K + c] / sum);
    }
  }
  auto build = [&](const std::vector<std::size_t>& order) {
    std::vector<float> data;
    for (auto s : order) data.insert(data.end(), samples[s].begin(), samples[s].end());
    return aggregate_samples(ProbabilityStack(S, N, K, data));
  };
  auto a = build({0, 1, 2, 3, 4, 5});
  auto b = build({5, 3, 1, 0, 2, 4});
  for (std::size_t i = 0; i < N; ++i) {
    double sum = 0;
    for (std::size_t c = 0; c < K; ++c) {
      EXPECT_NEAR(a.row(0, i)[c], b.row(0, i)[c], 1e-6);
      sum += a.row(0, i)[c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

TEST(MaxSoftmax, Examples) {
  auto [conf, pred] = max_softmax_confidence(stack_from_rows({{0.1f, 0.7f, 0.2f}}));
  EXPECT_FLOAT_EQ(conf.scores[0], 0.7f);
  EXPECT_EQ(pred[0], 1);
  auto [tie_conf, tie_pred] = max_softmax_confidence(stack_from_rows({{0.5f, 0.5f}}));
  EXPECT_EQ(tie_conf.scores[0], 0.5);
  EXPECT_EQ(tie_pred[0], 0);
  auto [uni, _] = max_softmax_confidence(stack_from_rows({{0.25f, 0.25f, 0.25f, 0.25f}}));
  EXPECT_EQ(uni.scores[0], 0.25);
}

TEST(MaxSoftmax, RequiresSingleSample) {
  expect_error(ErrorKind::DimensionMismatch,
               [] { max_softmax_confidence(ProbabilityStack(2, 1, 2, {1.f, 0.f, 0.f, 1.f})); });
}

TEST(Entropy, Examples) {
  auto c = entropy_confidence(
      stack_from_rows({{0.25f, 0.25f, 0.25f, 0.25f}, {0.f, 1.f, 0.f, 0.f}, {0.5f, 0.5f, 0.f, 0.f}}));
  EXPECT_NEAR(c.scores[0], 0.0, 1e-12);
  EXPECT_EQ(c.scores[1], 1.0);
  EXPECT_NEAR(c.scores[2], 1.0 - std::log(2.0) / std::log(4.0), 1e-12);
  EXPECT_NEAR(c.scores[2], 0.5, 1e-12);
  for (double s : c.scores) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

// For k = 2 both measures are strictly decreasing functions of |p - 0.5|, so
// they induce the same order.
TEST(Entropy, BinaryRankAgreement) {
  std::mt19937_64 rng(11);
  std::vector<std::vector<float>> rows;
  for (int i = 0; i < 500; ++i) {
    const float p = std::uniform_real_distribution<float>(0, 1)(rng);
    rows.push_back({p, 1.f - p});
  }
  auto probs = stack_from_rows(rows);
  auto [soft, _] = max_softmax_confidence(probs);
  auto ent = entropy_confidence(probs);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      const double ds = soft.scores[a] - soft.scores[b];
      const double de = ent.scores[a] - ent.scores[b];
      if (ds > 0) {
        EXPECT_GT(de, 0);
      } else if (ds < 0) {
        EXPECT_LT(de, 0);
      }
    }
  }
}
