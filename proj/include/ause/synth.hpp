#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ause/core.hpp"
#include "ause/io.hpp"

namespace ause::synth {

enum class CalibrationMode { Calibrated, Overconfident, Underconfident, Anticorrelated };

std::string_view to_string(CalibrationMode mode);
std::optional<CalibrationMode> parse_calibration_mode(std::string_view text);

struct ScenarioSpec {
  std::size_t n = 0;
  std::vector<double> class_frequencies;
  std::vector<double> per_class_accuracy;
  CalibrationMode calibration_mode = CalibrationMode::Calibrated;
  // Power-transform exponent; > 1 for overconfident, < 1 for underconfident.
  double gamma = 1.0;
  // Row g is the distribution of wrong predictions for gt class g (zero
  // diagonal). Empty means uniform over the other classes.
  std::vector<std::vector<double>> confusion_profile;
  std::uint64_t seed = 0;

  std::size_t k() const noexcept { return class_frequencies.size(); }
  // Throws Error(SpecInvalid).
  void validate() const;
};

struct Scenario {
  LabelArray gt;
  ProbabilityStack probs;  // S = 1
  LabelArray pred;         // argmax of probs
  // Probability that the prediction at each point is correct.
  std::vector<double> correctness_probability;
};

// Each point draws its gt class, a latent correctness probability whose mean
// is the class accuracy, and a correctness outcome from it. The predicted
// class receives the latent probability as its softmax value (clamped just
// above 1/k so it stays the argmax); the remaining mass is split randomly over
// the other classes. Calibration modes then distort the row: a renormalized
// power transform, or mirroring the confidence so correct points look unsure.
Scenario generate(const ScenarioSpec& spec);

// Three classes; class 2 ("unlearned") is never predicted, so its IoU is 0.
ScenarioSpec degenerate_class_spec(std::uint64_t seed, std::size_t n = 20000);
Scenario degenerate_class_scenario(std::uint64_t seed);

ClassCatalog default_catalog(std::size_t k);

struct ScenarioFile {
  ScenarioSpec spec;
  std::vector<std::string> class_names;
  std::size_t frames = 1;
  bool quantize = false;
};

ScenarioFile scenario_from_json(const nlohmann::json& j);
ScenarioFile preset(std::string_view name, std::uint64_t seed);

// Writes frame_XXXX_{probs,labels}.spt plus manifest.json into out_dir,
// splitting the points into `frames` contiguous frames.
io::Manifest write_scenario(const Scenario& scenario, const ClassCatalog& catalog,
                            const std::filesystem::path& out_dir, std::size_t frames, bool quantize);

}  // namespace ause::synth
