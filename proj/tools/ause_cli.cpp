// Command-line front end: evaluate, curves, synth, ece, inspect.
//
// Exit codes: 0 success, 1 usage, 2 input, 3 internal. Failures print a
// single line `error: kind=<Kind> message="..."` on stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ause/io.hpp"
#include "ause/pipeline.hpp"
#include "ause/report_io.hpp"
#include "ause/synth.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kInput = 2, kInternal = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string manifest;
  std::string out_dir;
  std::string measure = "both";
  std::size_t grid_steps = 100;
  double filter_threshold = 0.03;
  std::string ranking_domain = "subset";
  std::string tie_break = "stable_index";
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string format = "both";
  std::size_t ece_bins = 15;
  bool per_frame = false;
  std::string config_file;

  CLI::Option* grid_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
  CLI::Option* domain_opt = nullptr;
  CLI::Option* tie_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* measure_opt = nullptr;
  CLI::Option* bins_opt = nullptr;
  CLI::Option* per_frame_opt = nullptr;
};

void add_eval_flags(CLI::App* cmd, CommonFlags& f) {
  f.measure_opt = cmd->add_option("--measure", f.measure, "softmax, entropy or both")
                      ->check(CLI::IsMember({"softmax", "entropy", "both"}));
  f.grid_opt = cmd->add_option("--grid-steps", f.grid_steps, "removal-fraction grid size")->check(CLI::Range(2, 1000000));
  f.threshold_opt = cmd->add_option("--filter-threshold", f.filter_threshold, "IoU below which a class is filtered")
                        ->check(CLI::Range(0.0, 0.999999999));
  f.domain_opt = cmd->add_option("--ranking-domain", f.ranking_domain, "subset or global")
                     ->check(CLI::IsMember({"subset", "global"}));
  f.tie_opt = cmd->add_option("--tie-break", f.tie_break, "stable_index or seeded_random")
                  ->check(CLI::IsMember({"stable_index", "stable", "seeded_random", "seeded"}));
  f.seed_opt = cmd->add_option("--seed", f.seed, "seed for tie shuffling and logit sampling");
  cmd->add_option("--threads", f.threads, "worker threads; never changes results")->check(CLI::Range(1u, 256u));
  f.bins_opt = cmd->add_option("--ece-bins", f.ece_bins, "equal-width ECE bins")->check(CLI::Range(1, 100000));
  f.per_frame_opt = cmd->add_flag("--per-frame", f.per_frame, "add frame-averaged diagnostic AUSE");
  cmd->add_option("--config", f.config_file, "config JSON, or a report whose provenance config is reused");
}

std::vector<ause::ConfidenceMeasure> measures_from(const std::string& text) {
  if (text == "softmax") return {ause::ConfidenceMeasure::MaxSoftmax};
  if (text == "entropy") return {ause::ConfidenceMeasure::NegEntropy};
  return {ause::ConfidenceMeasure::MaxSoftmax, ause::ConfidenceMeasure::NegEntropy};
}

// Defaults, then manifest overrides, then --config, then explicit flags.
ause::EvalConfig resolve_config(const CommonFlags& f, const ause::io::Manifest* manifest) {
  ause::EvalConfig config;
  if (manifest) config = ause::io::config_from_json(manifest->config_overrides, config);
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw ause::Error(ause::ErrorKind::IoFailure, "cannot open config " + f.config_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ause::Error(ause::ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    if (j.contains("provenance")) j = j.at("provenance").at("config");
    config = ause::io::config_from_json(j, config);
  }
  if (f.grid_opt->count()) config.grid_steps = f.grid_steps;
  if (f.threshold_opt->count()) config.iou_filter_threshold = f.filter_threshold;
  if (f.domain_opt->count()) config.ranking_domain = *ause::parse_ranking_domain(f.ranking_domain);
  if (f.tie_opt->count()) config.tie_break = *ause::parse_tie_break(f.tie_break);
  if (f.seed_opt->count()) config.rng_seed = f.seed;
  if (f.measure_opt->count()) config.measures = measures_from(f.measure);
  if (f.bins_opt->count()) config.ece_bins = f.ece_bins;
  if (f.per_frame_opt->count()) config.per_frame = f.per_frame;
  config.threads = f.threads;
  config.validate();
  return config;
}

ause::io::Manifest load_manifest(const std::string& path) {
  if (!fs::exists(path)) throw ause::Error(ause::ErrorKind::IoFailure, "manifest not found: " + path);
  return ause::io::read_manifest(path);
}

ause::io::ReportFormat format_from(const std::string& text) {
  if (text == "csv") return ause::io::ReportFormat::Csv;
  if (text == "json") return ause::io::ReportFormat::Json;
  return ause::io::ReportFormat::Both;
}

int run_evaluate(const CommonFlags& f) {
  const auto manifest = load_manifest(f.manifest);
  const auto config = resolve_config(f, &manifest);
  const auto report = ause::evaluate_split(manifest, config);
  for (const auto& path : ause::io::write_report(report, f.out_dir, format_from(f.format))) {
    std::cout << "wrote " << path.string() << '\n';
  }
  return kOk;
}

int run_curves(const CommonFlags& f, const std::string& class_name) {
  const auto manifest = load_manifest(f.manifest);
  auto config = resolve_config(f, &manifest);
  // One curve file per measure; softmax unless --measure says otherwise.
  config.measures = measures_from(f.measure);
  const auto c = manifest.catalog.find(class_name);
  if (!c) throw ause::Error(ause::ErrorKind::UnknownClass, "unknown class '" + class_name + "'");
  if (config.measures.size() > 1 && f.out_dir.empty()) {
    throw UsageError("--measure both needs --out-dir");
  }
  const auto acc = ause::accumulate_split(manifest, config);
  std::vector<std::pair<ause::ConfidenceMeasure, std::string>> outputs;
  for (auto m : config.measures) outputs.emplace_back(m, ause::io::curves_csv(acc.curves(*c, m)));
  if (f.out_dir.empty()) {
    std::cout << outputs.front().second;
    return kOk;
  }
  fs::create_directories(f.out_dir);
  for (const auto& [m, text] : outputs) {
    const fs::path path = fs::path(f.out_dir) / ("curves_" + class_name + "_" + std::string(ause::to_string(m)) + ".csv");
    ause::io::write_text_file(path, text);
    std::cout << "wrote " << path.string() << '\n';
  }
  return kOk;
}

int run_ece(const CommonFlags& f) {
  auto manifest = load_manifest(f.manifest);
  auto config = resolve_config(f, &manifest);
  config.measures = {ause::ConfidenceMeasure::MaxSoftmax};
  const double value = ause::accumulate_split(manifest, config).ece();
  std::cout << "ece," << ause::io::format_number(value) << '\n';
  return kOk;
}

int run_synth(const std::string& spec_path, const std::string& preset_name, const std::string& out_dir,
              std::optional<std::uint64_t> seed, std::optional<std::size_t> frames, bool quantize) {
  ause::synth::ScenarioFile file;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw ause::Error(ause::ErrorKind::IoFailure, "cannot open spec " + spec_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ause::Error(ause::ErrorKind::SpecInvalid, std::string("spec is not valid JSON: ") + e.what());
    }
    file = ause::synth::scenario_from_json(j);
    if (seed) file.spec.seed = *seed;
  } else {
    file = ause::synth::preset(preset_name, seed.value_or(0));
  }
  if (frames) file.frames = *frames;
  if (quantize) file.quantize = true;
  file.spec.validate();
  const auto catalog = file.class_names.empty() ? ause::synth::default_catalog(file.spec.k())
                                                : ause::ClassCatalog(file.class_names);
  const auto scenario = ause::synth::generate(file.spec);
  ause::synth::write_scenario(scenario, catalog, out_dir, file.frames, file.quantize);
  std::cout << "wrote " << (fs::path(out_dir) / "manifest.json").string() << '\n';
  return kOk;
}

std::string dtype_name(ause::io::DType d) {
  switch (d) {
    case ause::io::DType::Float32: return "f32";
    case ause::io::DType::UInt8: return "u8";
    case ause::io::DType::UInt16: return "u16";
  }
  return "?";
}

void print_tensor_header(const fs::path& path) {
  const auto t = ause::io::read_tensor(path);
  std::cout << path.string() << ": dtype=" << dtype_name(t.dtype) << " rank=" << t.dims.size() << " dims=";
  for (std::size_t i = 0; i < t.dims.size(); ++i) std::cout << (i ? "x" : "") << t.dims[i];
  char digest[17];
  std::snprintf(digest, sizeof(digest), "%016llx", static_cast<unsigned long long>(t.checksum()));
  std::cout << " checksum=" << digest << '\n';
}

int run_inspect(const std::string& path) {
  if (!fs::exists(path)) throw ause::Error(ause::ErrorKind::IoFailure, "not found: " + path);
  if (fs::path(path).extension() == ".json") {
    const auto m = ause::io::read_manifest(path);
    std::cout << "manifest " << path << ": k=" << m.catalog.k() << " ignore_index=" << m.catalog.ignore_index()
              << " frames=" << m.frames.size() << '\n';
    std::cout << "classes:";
    for (const auto& n : m.catalog.names()) std::cout << ' ' << n;
    std::cout << "\nconfig: " << ause::io::config_to_json(ause::io::config_from_json(m.config_overrides)).dump() << '\n';
    for (const auto& e : m.frames) {
      std::cout << "frame " << e.id << '\n';
      print_tensor_header(m.base_dir / e.prediction_path);
      print_tensor_header(m.base_dir / e.labels_path);
      if (e.stddev_path) print_tensor_header(m.base_dir / *e.stddev_path);
    }
    return kOk;
  }
  print_tensor_header(path);
  return kOk;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += (ch == '\n' ? ' ' : ch);
  }
  return out;
}

int report_error(std::string_view kind, const std::string& message, int code) {
  std::cerr << "error: kind=" << kind << " message=\"" << escape(message) << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-wise calibration evaluation with sparsification curves and AUSE"};
  app.require_subcommand(1);

  CommonFlags eval_flags;
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a split and write the report");
  evaluate->add_option("--manifest", eval_flags.manifest, "split manifest")->required();
  evaluate->add_option("--out-dir", eval_flags.out_dir, "output directory")->required();
  evaluate->add_option("--format", eval_flags.format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
  add_eval_flags(evaluate, eval_flags);

  CommonFlags curve_flags;
  curve_flags.measure = "softmax";
  std::string class_name;
  auto* curves = app.add_subcommand("curves", "per-fraction sparsification and oracle error for one class");
  curves->add_option("--manifest", curve_flags.manifest, "split manifest")->required();
  curves->add_option("--class", class_name, "class name")->required();
  curves->add_option("--out-dir", curve_flags.out_dir, "output directory (stdout when omitted)");
  add_eval_flags(curves, curve_flags);

  std::string spec_path, preset_name, synth_out;
  std::uint64_t synth_seed = 0;
  std::size_t synth_frames = 1;
  bool quantize = false;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scenario and its manifest");
  auto* spec_opt = synth->add_option("--spec", spec_path, "scenario spec JSON");
  auto* preset_opt = synth->add_option("--preset", preset_name, "degenerate, imbalanced or lidar19")
                         ->check(CLI::IsMember({"degenerate", "imbalanced", "lidar19"}));
  spec_opt->excludes(preset_opt);
  synth->add_option("--out-dir", synth_out, "output directory")->required();
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "generator seed");
  auto* frames_opt = synth->add_option("--frames", synth_frames, "number of frames")->check(CLI::PositiveNumber);
  synth->add_flag("--quantize", quantize, "store probabilities as u16 fixed point");

  CommonFlags ece_flags;
  auto* ece_cmd = app.add_subcommand("ece", "expected calibration error of max-softmax confidence");
  ece_cmd->add_option("--manifest", ece_flags.manifest, "split manifest")->required();
  add_eval_flags(ece_cmd, ece_flags);

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "print tensor headers or a manifest summary");
  inspect->add_option("path", inspect_path, "tensor file or manifest.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("Usage", e.what(), kUsage);
  }

  try {
    if (*evaluate) return run_evaluate(eval_flags);
    if (*curves) return run_curves(curve_flags, class_name);
    if (*ece_cmd) return run_ece(ece_flags);
    if (*synth) {
      if (spec_path.empty() && preset_name.empty()) throw UsageError("synth needs --spec or --preset");
      return run_synth(spec_path, preset_name, synth_out,
                       synth_seed_opt->count() ? std::optional(synth_seed) : std::nullopt,
                       frames_opt->count() ? std::optional(synth_frames) : std::nullopt, quantize);
    }
    if (*inspect) return run_inspect(inspect_path);
  } catch (const UsageError& e) {
    return report_error("Usage", e.what(), kUsage);
  } catch (const ause::Error& e) {
    return report_error(ause::to_string(e.kind()), e.what(), kInput);
  } catch (const std::exception& e) {
    return report_error("Internal", e.what(), kInternal);
  }
  return kUsage;
}
