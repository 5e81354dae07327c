#include "ause/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ause::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Keeps the predicted entry strictly above every other entry of a row, with
// room to spare after rounding to f32.
constexpr double kArgmaxMargin = 1e-3;
constexpr double kResidualCap = 1.0 - 1e-4;
// Dirichlet concentration of the residual split.
constexpr double kResidualConcentration = 0.5;

void fail(const std::string& message) { throw Error(ErrorKind::SpecInvalid, message); }

bool is_distribution(const std::vector<double>& row) {
  double sum = 0.0;
  for (double v : row) {
    if (!std::isfinite(v) || v < 0.0) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= 1e-9;
}

std::vector<std::vector<double>> effective_profile(const ScenarioSpec& spec) {
  if (!spec.confusion_profile.empty()) return spec.confusion_profile;
  const std::size_t k = spec.k();
  std::vector<std::vector<double>> uniform(k, std::vector<double>(k, 1.0 / static_cast<double>(k - 1)));
  for (std::size_t c = 0; c < k; ++c) uniform[c][c] = 0.0;
  return uniform;
}

// Latent correctness probability with mean `accuracy`. At or above 1/k it
// spans [1/k, 1]; below 1/k it spans [0, 1/k].
double latent_correctness(double accuracy, double floor, double u) {
  if (accuracy >= floor) {
    const double m = (accuracy - floor) / (1.0 - floor);
    if (m <= 0.0) return floor;
    return floor + (1.0 - floor) * std::pow(u, 1.0 / m - 1.0);
  }
  if (accuracy <= 0.0) return 0.0;
  return floor * std::pow(u, floor / accuracy - 1.0);
}

}  // namespace

std::string_view to_string(CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::Calibrated: return "calibrated";
    case CalibrationMode::Overconfident: return "overconfident";
    case CalibrationMode::Underconfident: return "underconfident";
    case CalibrationMode::Anticorrelated: return "anticorrelated";
  }
  return "calibrated";
}

std::optional<CalibrationMode> parse_calibration_mode(std::string_view text) {
  for (auto mode : {CalibrationMode::Calibrated, CalibrationMode::Overconfident,
                    CalibrationMode::Underconfident, CalibrationMode::Anticorrelated}) {
    if (text == to_string(mode)) return mode;
  }
  return std::nullopt;
}

void ScenarioSpec::validate() const {
  const std::size_t classes = k();
  if (n < 1) fail("n must be >= 1");
  if (n > std::numeric_limits<std::uint32_t>::max()) fail("n exceeds the container limit");
  if (classes < 2) fail("need at least 2 classes");
  double total = 0.0;
  for (double f : class_frequencies) {
    if (!std::isfinite(f) || f < 0.0) fail("class frequencies must be finite and >= 0");
    total += f;
  }
  if (total <= 0.0) fail("class frequencies must sum to a positive value");
  if (per_class_accuracy.size() != classes) fail("per_class_accuracy needs one entry per class");
  for (double a : per_class_accuracy) {
    if (!(a >= 0.0 && a <= 1.0)) fail("accuracies must lie in [0, 1]");
  }
  if (!confusion_profile.empty()) {
    if (confusion_profile.size() != classes) fail("confusion_profile must be k x k");
    for (std::size_t g = 0; g < classes; ++g) {
      const auto& row = confusion_profile[g];
      if (row.size() != classes || !is_distribution(row)) fail("confusion_profile rows must be distributions");
      if (row[g] != 0.0) fail("confusion_profile diagonal must be zero");
    }
  }
  if (!std::isfinite(gamma) || gamma <= 0.0) fail("gamma must be positive");
  if (calibration_mode == CalibrationMode::Overconfident && !(gamma > 1.0)) fail("overconfident needs gamma > 1");
  if (calibration_mode == CalibrationMode::Underconfident && !(gamma < 1.0)) fail("underconfident needs gamma < 1");
}

Scenario generate(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t k = spec.k();
  const std::size_t n = spec.n;
  const double floor = 1.0 / static_cast<double>(k);
  const auto profile = effective_profile(spec);

  // Every point consumes the same draws in the same order whatever the
  // calibration mode, so modes sharing a seed share gt, correctness and splits.
  std::mt19937_64 rng(spec.seed);
  std::discrete_distribution<std::size_t> class_draw(spec.class_frequencies.begin(), spec.class_frequencies.end());
  std::vector<std::discrete_distribution<std::size_t>> error_draw;
  for (const auto& row : profile) error_draw.emplace_back(row.begin(), row.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::gamma_distribution<double> split(kResidualConcentration, 1.0);

  Scenario out;
  std::vector<ClassIndex> gt(n), pred(n);
  std::vector<float> data(n * k);
  out.correctness_probability.resize(n);
  std::vector<double> weights(k - 1), row(k);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = class_draw(rng);
    const double u = unit(rng);
    const double v = unit(rng);
    const std::size_t wrong = error_draw[g](rng);
    for (auto& w : weights) w = split(rng);

    const double t = latent_correctness(spec.per_class_accuracy[g], floor, u);
    const bool correct = v < t;
    const std::size_t p = correct ? g : wrong;

    double q = std::clamp(t, floor + kArgmaxMargin, 1.0);
    if (spec.calibration_mode == CalibrationMode::Anticorrelated) {
      q = std::clamp(1.0 + floor - q, floor + kArgmaxMargin, 1.0);
    }

    const double residual = 1.0 - q;
    const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    const double uniform = residual / static_cast<double>(k - 1);
    double mix = weight_sum > 0.0 ? 0.0 : 1.0;
    if (weight_sum > 0.0) {
      const double largest = residual * *std::max_element(weights.begin(), weights.end()) / weight_sum;
      const double cap = q * kResidualCap;
      if (largest > cap) mix = (largest - cap) / (largest - uniform);
    }
    for (std::size_t c = 0, w = 0; c < k; ++c) {
      if (c == p) {
        row[c] = q;
        continue;
      }
      const double share = weight_sum > 0.0 ? residual * weights[w] / weight_sum : uniform;
      row[c] = (1.0 - mix) * share + mix * uniform;
      ++w;
    }

    if (spec.calibration_mode == CalibrationMode::Overconfident ||
        spec.calibration_mode == CalibrationMode::Underconfident) {
      double total = 0.0;
      for (auto& r : row) {
        r = std::pow(r, spec.gamma);
        total += r;
      }
      for (auto& r : row) r /= total;
    }

    for (std::size_t c = 0; c < k; ++c) data[i * k + c] = static_cast<float>(row[c]);
    if (k == 2) {
      // Exact f32 complement; the larger entry is >= 0.5 so this is lossless.
      data[i * k + (1 - p)] = 1.0f - data[i * k + p];
    }
    gt[i] = static_cast<ClassIndex>(g);
    pred[i] = static_cast<ClassIndex>(p);
    out.correctness_probability[i] = t;
  }

  out.gt = LabelArray(std::move(gt));
  out.pred = LabelArray(std::move(pred));
  out.probs = ProbabilityStack(1, n, k, std::move(data));
  return out;
}

ScenarioSpec degenerate_class_spec(std::uint64_t seed, std::size_t n) {
  ScenarioSpec spec;
  spec.n = n;
  spec.class_frequencies = {0.6, 0.3, 0.1};
  spec.per_class_accuracy = {0.9, 0.85, 0.0};
  spec.confusion_profile = {{0.0, 1.0, 0.0}, {1.0, 0.0, 0.0}, {0.5, 0.5, 0.0}};
  spec.seed = seed;
  return spec;
}

Scenario degenerate_class_scenario(std::uint64_t seed) { return generate(degenerate_class_spec(seed)); }

ClassCatalog default_catalog(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) names.push_back("class_" + std::to_string(c));
  return ClassCatalog(std::move(names));
}

ScenarioFile scenario_from_json(const json& j) {
  try {
    ScenarioFile file;
    auto& spec = file.spec;
    spec.n = j.at("n").get<std::size_t>();
    spec.class_frequencies = j.at("class_frequencies").get<std::vector<double>>();
    spec.per_class_accuracy = j.at("per_class_accuracy").get<std::vector<double>>();
    if (j.contains("calibration_mode")) {
      auto mode = parse_calibration_mode(j.at("calibration_mode").get<std::string>());
      if (!mode) fail("unknown calibration_mode");
      spec.calibration_mode = *mode;
    }
    spec.gamma = j.value("gamma", 1.0);
    if (j.contains("confusion_profile")) {
      spec.confusion_profile = j.at("confusion_profile").get<std::vector<std::vector<double>>>();
    }
    spec.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("classes")) file.class_names = j.at("classes").get<std::vector<std::string>>();
    file.frames = j.value("frames", std::size_t{1});
    file.quantize = j.value("quantize", false);
    if (file.frames < 1) fail("frames must be >= 1");
    if (!file.class_names.empty() && file.class_names.size() != spec.k()) fail("classes must name every class");
    return file;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SpecInvalid, std::string("malformed scenario spec: ") + e.what());
  }
}

ScenarioFile preset(std::string_view name, std::uint64_t seed) {
  ScenarioFile file;
  if (name == "degenerate") {
    file.spec = degenerate_class_spec(seed);
    file.class_names = {"learned_a", "learned_b", "unlearned"};
  } else if (name == "imbalanced") {
    file.spec.n = 100000;
    // Never-labelled distractor classes absorb errors. Several of them let the
    // residual mass vary in shape, which a power transform turns into ranking noise.
    constexpr std::size_t kDistractors = 6;
    const std::size_t k = 2 + kDistractors;
    file.spec.class_frequencies.assign(k, 0.0);
    file.spec.class_frequencies[0] = 0.99;
    file.spec.class_frequencies[1] = 0.01;
    file.spec.per_class_accuracy.assign(k, 0.8);
    file.spec.confusion_profile.assign(k, std::vector<double>(k, 1.0 / (k - 1)));
    for (std::size_t c = 0; c < k; ++c) file.spec.confusion_profile[c][c] = 0.0;
    for (std::size_t c = 2; c < k; ++c) {
      file.spec.confusion_profile[0][c] = 0.95 / kDistractors;
      file.spec.confusion_profile[1][c] = 0.5 / kDistractors;
    }
    file.spec.confusion_profile[0][1] = 0.05;
    file.spec.confusion_profile[1][0] = 0.5;
    file.class_names = {"majority", "minority"};
    for (std::size_t c = 1; c <= kDistractors; ++c) file.class_names.push_back("distractor-" + std::to_string(c));
  } else if (name == "lidar19") {
    // Illustrative street-scene imbalance; not fitted to any dataset.
    file.class_names = {"car",      "bicycle",  "motorcycle",   "truck",    "other-vehicle",
                        "person",   "bicyclist", "motorcyclist", "road",     "parking",
                        "sidewalk", "other-ground", "building",  "fence",    "vegetation",
                        "trunk",    "terrain",  "pole",         "traffic-sign"};
    file.spec.n = 1000000;
    file.spec.class_frequencies = {4.0, 0.02, 0.04, 0.2, 0.3, 0.05, 0.02, 0.005, 20.0, 1.5,
                                   14.0, 0.4, 13.0, 6.0, 27.0, 0.6, 8.0, 0.3, 0.06};
    file.spec.per_class_accuracy = {0.93, 0.2, 0.15, 0.1, 0.25, 0.35, 0.3, 0.0, 0.96, 0.3,
                                    0.85, 0.05, 0.9, 0.4, 0.9, 0.6, 0.75, 0.7, 0.4};
  } else {
    fail("unknown preset '" + std::string(name) + "'");
  }
  file.spec.seed = seed;
  return file;
}

io::Manifest write_scenario(const Scenario& scenario, const ClassCatalog& catalog, const fs::path& out_dir,
                            std::size_t frames, bool quantize) {
  const std::size_t n = scenario.gt.size();
  const std::size_t k = scenario.probs.classes();
  if (catalog.k() != k) throw Error(ErrorKind::DimensionMismatch, "catalog does not match scenario classes");
  if (frames < 1 || frames > n) throw Error(ErrorKind::SpecInvalid, "frame count must lie in [1, n]");

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + out_dir.string());

  io::Manifest manifest{out_dir, catalog, {}, json::object()};
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t begin = n * f / frames;
    const std::size_t end = n * (f + 1) / frames;
    const auto all = scenario.probs.data();
    ProbabilityStack probs(1, end - begin, k,
                           std::vector<float>(all.begin() + begin * k, all.begin() + end * k));
    const auto labels = scenario.gt.values();
    LabelArray gt(std::vector<ClassIndex>(labels.begin() + begin, labels.begin() + end));

    char stem[32];
    std::snprintf(stem, sizeof(stem), "frame_%04zu", f);
    io::FrameEntry entry;
    entry.id = stem;
    entry.prediction_path = std::string(stem) + "_probs.spt";
    entry.labels_path = std::string(stem) + "_labels.spt";
    entry.samples = 1;
    io::write_tensor(quantize ? io::quantize_probabilities(probs) : io::probabilities_container(probs),
                     out_dir / entry.prediction_path);
    io::write_tensor(io::labels_container(gt), out_dir / entry.labels_path);
    manifest.frames.push_back(std::move(entry));
  }
  io::write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace ause::synth
