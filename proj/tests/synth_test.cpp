#include <cmath>

#include "ause/confidence.hpp"
#include "ause/pipeline.hpp"
#include "ause/segmetrics.hpp"
#include "ause/synth.hpp"
#include "test_helpers.hpp"

using namespace ause;
using ause::testing::expect_error;

namespace {

synth::ScenarioSpec base_spec(std::uint64_t seed) {
  synth::ScenarioSpec spec;
  spec.n = 20000;
  spec.class_frequencies = {0.5, 0.3, 0.2};
  spec.per_class_accuracy = {0.8, 0.7, 0.6};
  spec.seed = seed;
  return spec;
}

std::vector<std::optional<double>> ause_of(const synth::Scenario& sc, std::size_t k, ConfidenceMeasure m) {
  std::vector<std::optional<double>> out;
  for (const auto& c : per_class_ause(sc.probs, sc.gt, synth::default_catalog(k), m, EvalConfig{})) out.push_back(c.ause);
  return out;
}

}  // namespace

TEST(Synth, RowsAreDistributionsWithMatchingArgmax) {
  for (auto mode : {synth::CalibrationMode::Calibrated, synth::CalibrationMode::Overconfident,
                    synth::CalibrationMode::Underconfident, synth::CalibrationMode::Anticorrelated}) {
    auto spec = base_spec(1);
    spec.calibration_mode = mode;
    spec.gamma = mode == synth::CalibrationMode::Overconfident ? 3.0 : mode == synth::CalibrationMode::Underconfident ? 0.5 : 1.0;
    const auto sc = synth::generate(spec);
    EXPECT_NO_THROW(validate_inputs(sc.probs, sc.gt, synth::default_catalog(3)));
    auto [conf, pred] = max_softmax_confidence(sc.probs);
    EXPECT_EQ(pred, sc.pred) << to_string(mode);
  }
}

TEST(Synth, PerfectAccuracy) {
  auto spec = base_spec(2);
  spec.per_class_accuracy = {1.0, 1.0, 1.0};
  const auto sc = synth::generate(spec);
  const auto ious = iou(confusion(sc.pred, sc.gt, synth::default_catalog(3)));
  for (const auto& v : ious.values) EXPECT_EQ(v, 1.0);
  for (auto m : {ConfidenceMeasure::MaxSoftmax, ConfidenceMeasure::NegEntropy}) {
    for (const auto& a : ause_of(sc, 3, m)) EXPECT_EQ(a, 0.0);
  }
}

TEST(Synth, EmpiricalAccuracyTracksSpec) {
  auto spec = base_spec(3);
  spec.n = 100000;
  const auto sc = synth::generate(spec);
  std::vector<double> hits(3), counts(3);
  for (std::size_t i = 0; i < spec.n; ++i) {
    counts[sc.gt[i]] += 1;
    hits[sc.gt[i]] += sc.pred[i] == sc.gt[i];
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const double a = spec.per_class_accuracy[c];
    EXPECT_NEAR(hits[c] / counts[c], a, 4 * std::sqrt(a * (1 - a) / counts[c]));
  }
}

TEST(Synth, MinorityFrequencyWithinBinomialBound) {
  synth::ScenarioSpec spec;
  spec.n = 100000;
  spec.class_frequencies = {0.99, 0.01};
  spec.per_class_accuracy = {0.9, 0.9};
  spec.seed = 4;
  const auto sc = synth::generate(spec);
  std::size_t minority = 0;
  for (std::size_t i = 0; i < spec.n; ++i) minority += sc.gt[i] == 1;
  const double expected = 0.01 * spec.n;
  EXPECT_LT(std::abs(static_cast<double>(minority) - expected), 3 * std::sqrt(spec.n * 0.01 * 0.99));
}

TEST(Synth, InvalidSpecs) {
  auto spec = base_spec(5);
  spec.n = 0;
  expect_error(ErrorKind::SpecInvalid, [&] { synth::generate(spec); });
  spec = base_spec(5);
  spec.per_class_accuracy = {0.5};
  expect_error(ErrorKind::SpecInvalid, [&] { synth::generate(spec); });
  spec = base_spec(5);
  spec.calibration_mode = synth::CalibrationMode::Overconfident;
  spec.gamma = 0.5;
  expect_error(ErrorKind::SpecInvalid, [&] { synth::generate(spec); });
  spec = base_spec(5);
  spec.confusion_profile = {{0.5, 0.5, 0}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
  expect_error(ErrorKind::SpecInvalid, [&] { synth::generate(spec); });
}

TEST(Synth, DeterministicPerSeed) {
  const auto a = synth::generate(base_spec(6)), b = synth::generate(base_spec(6)), c = synth::generate(base_spec(7));
  EXPECT_EQ(a.probs, b.probs);
  EXPECT_EQ(a.gt, b.gt);
  EXPECT_NE(a.probs, c.probs);
}

TEST(Synth, ModesShareGroundTruthAndPredictions) {
  auto spec = base_spec(8);
  const auto cal = synth::generate(spec);
  spec.calibration_mode = synth::CalibrationMode::Anticorrelated;
  const auto anti = synth::generate(spec);
  EXPECT_EQ(cal.gt, anti.gt);
  EXPECT_EQ(cal.pred, anti.pred);
}

TEST(Synth, DegenerateClass) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto sc = synth::degenerate_class_scenario(seed);
    const auto cat = synth::default_catalog(3);
    const auto ious = iou(confusion(sc.pred, sc.gt, cat));
    EXPECT_EQ(ious.values[2], 0.0);
    for (auto m : {ConfidenceMeasure::MaxSoftmax, ConfidenceMeasure::NegEntropy}) {
      const auto a = ause_of(sc, 3, m);
      EXPECT_EQ(a[2], 0.0);
      EXPECT_GT(*a[0], 0.0);
    }
  }
}

// Anticorrelated confidence must rank worse than calibrated confidence, and
// calibrated data must have a small ECE.
TEST(Synth, CalibratedBeatsAnticorrelated) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto spec = base_spec(100 + seed);
    const auto cal = synth::generate(spec);
    spec.calibration_mode = synth::CalibrationMode::Anticorrelated;
    const auto anti = synth::generate(spec);
    const auto a = ause_of(cal, 3, ConfidenceMeasure::MaxSoftmax);
    const auto b = ause_of(anti, 3, ConfidenceMeasure::MaxSoftmax);
    bool all = true;
    for (std::size_t c = 0; c < 3; ++c) all = all && *a[c] < *b[c];
    wins += all;
    EXPECT_LT(ece(cal.probs, cal.gt, 15), 0.02);
  }
  EXPECT_GE(wins, 19);
}

TEST(Synth, ScenarioJsonAndPresets) {
  const auto file = synth::scenario_from_json(nlohmann::json{{"n", 10},
                                                             {"class_frequencies", {1, 1}},
                                                             {"per_class_accuracy", {0.5, 0.5}},
                                                             {"calibration_mode", "overconfident"},
                                                             {"gamma", 2.0},
                                                             {"seed", 3},
                                                             {"frames", 2}});
  EXPECT_EQ(file.spec.calibration_mode, synth::CalibrationMode::Overconfident);
  EXPECT_EQ(file.frames, 2u);
  expect_error(ErrorKind::SpecInvalid, [] { synth::scenario_from_json(nlohmann::json{{"n", 5}}); });
  expect_error(ErrorKind::SpecInvalid, [] { synth::preset("nope", 1); });
  EXPECT_EQ(synth::preset("lidar19", 1).class_names.size(), 19u);
  EXPECT_NO_THROW(synth::preset("imbalanced", 1).spec.validate());
  EXPECT_NO_THROW(synth::preset("lidar19", 1).spec.validate());
}

TEST(Synth, ImbalancedPresetLabelsOnlyTwoClasses) {
  auto spec = synth::preset("imbalanced", 4).spec;
  spec.n = 50000;
  const auto sc = synth::generate(spec);
  std::size_t minority = 0;
  for (std::size_t i = 0; i < sc.gt.size(); ++i) {
    ASSERT_LT(sc.gt[i], 2);
    minority += sc.gt[i] == 1;
  }
  EXPECT_NEAR(static_cast<double>(minority) / static_cast<double>(spec.n), 0.01, 0.003);
  std::size_t distractor_predictions = 0;
  for (std::size_t i = 0; i < sc.pred.size(); ++i) distractor_predictions += sc.pred[i] >= 2;
  EXPECT_GT(distractor_predictions, 0u);
}
