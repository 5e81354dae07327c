#include "ause/report_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ause::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error(ErrorKind::IoFailure, "cannot format number");
  return std::string(buf, end);
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ShapeMismatch, "malformed digest '" + s + "'");
  }
  return v;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string csv_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

json report_to_json(const EvalReport& report) {
  json measures = json::array();
  for (auto m : report.measures) measures.push_back(std::string(to_string(m)));

  json classes = json::array();
  for (const auto& row : report.rows) {
    json ause = json::object();
    for (std::size_t m = 0; m < report.measures.size(); ++m) {
      ause[std::string(to_string(report.measures[m]))] = optional_number(row.ause[m]);
    }
    classes.push_back({{"name", row.name},
                       {"index", row.class_index},
                       {"iou", optional_number(row.iou)},
                       {"ause", ause},
                       {"relevant_count", row.relevant_count},
                       {"filtered", row.filtered}});
  }

  json aggregates = json::object();
  for (std::size_t m = 0; m < report.measures.size(); ++m) {
    aggregates[std::string(to_string(report.measures[m]))] = {
        {"all", optional_number(report.aggregates[m].overall)},
        {"all_filtered", optional_number(report.aggregates[m].filtered)}};
  }

  json confusion = json::array();
  const auto& cm = report.confusion;
  for (std::size_t g = 0; g < cm.k(); ++g) {
    json row = json::array();
    for (std::size_t p = 0; p < cm.k(); ++p) row.push_back(cm.at(g, p));
    confusion.push_back(std::move(row));
  }

  const auto scatter = scatter_export(report);
  json points = json::array();
  for (const auto& p : scatter.points) {
    points.push_back({{"measure", std::string(to_string(p.measure))},
                      {"class", p.class_name},
                      {"iou", p.iou},
                      {"ause", p.ause},
                      {"outlier", p.outlier}});
  }

  json frames = json::array();
  for (const auto& f : report.provenance.frames) {
    frames.push_back({{"id", f.id}, {"prediction", hex64(f.prediction)}, {"labels", hex64(f.labels)}});
  }

  json j{{"format", "ause-report/1"},
         {"ignore_index", report.ignore_index},
         {"measures", measures},
         {"classes", classes},
         {"aggregates", aggregates},
         {"miou_present", optional_number(report.miou_present)},
         {"miou_all", report.miou_all},
         {"ece", report.ece},
         {"point_count", report.point_count},
         {"ignored_count", report.ignored_count},
         {"confusion", confusion},
         {"scatter", {{"threshold", scatter.threshold}, {"points", points}}},
         {"provenance",
          {{"config", config_to_json(report.provenance.config)},
           {"frames", frames},
           {"tool_version", report.provenance.tool_version}}}};
  if (!report.per_frame_ause.empty()) {
    json per_frame = json::object();
    for (std::size_t m = 0; m < report.measures.size(); ++m) {
      json values = json::array();
      for (const auto& v : report.per_frame_ause[m]) values.push_back(optional_number(v));
      per_frame[std::string(to_string(report.measures[m]))] = values;
    }
    j["per_frame_ause"] = per_frame;
  }
  return j;
}

EvalReport report_from_json(const json& j) {
  try {
    EvalReport report;
    report.ignore_index = j.at("ignore_index").get<ClassIndex>();
    for (const auto& m : j.at("measures")) {
      auto parsed = parse_measure(m.get<std::string>());
      if (!parsed) throw Error(ErrorKind::ShapeMismatch, "unknown measure in report");
      report.measures.push_back(*parsed);
    }
    for (const auto& c : j.at("classes")) {
      ClassRow row;
      row.name = c.at("name").get<std::string>();
      row.class_index = c.at("index").get<std::size_t>();
      row.iou = read_optional(c.at("iou"));
      for (auto m : report.measures) row.ause.push_back(read_optional(c.at("ause").at(std::string(to_string(m)))));
      row.relevant_count = c.at("relevant_count").get<std::size_t>();
      row.filtered = c.at("filtered").get<bool>();
      report.rows.push_back(std::move(row));
    }
    for (auto m : report.measures) {
      const auto& a = j.at("aggregates").at(std::string(to_string(m)));
      report.aggregates.push_back({read_optional(a.at("all")), read_optional(a.at("all_filtered"))});
    }
    report.miou_present = read_optional(j.at("miou_present"));
    report.miou_all = j.at("miou_all").get<double>();
    report.ece = j.at("ece").get<double>();
    report.point_count = j.at("point_count").get<std::uint64_t>();
    report.ignored_count = j.at("ignored_count").get<std::uint64_t>();

    const auto& confusion = j.at("confusion");
    report.confusion = ConfusionMatrix(confusion.size());
    for (std::size_t g = 0; g < confusion.size(); ++g) {
      if (confusion[g].size() != confusion.size()) throw Error(ErrorKind::ShapeMismatch, "confusion not square");
      for (std::size_t p = 0; p < confusion.size(); ++p) report.confusion.add(g, p, confusion[g][p].get<std::uint64_t>());
    }

    if (j.contains("per_frame_ause")) {
      for (auto m : report.measures) {
        std::vector<std::optional<double>> values;
        for (const auto& v : j.at("per_frame_ause").at(std::string(to_string(m)))) values.push_back(read_optional(v));
        report.per_frame_ause.push_back(std::move(values));
      }
    }

    const auto& prov = j.at("provenance");
    report.provenance.config = config_from_json(prov.at("config"));
    for (const auto& f : prov.at("frames")) {
      report.provenance.frames.push_back({f.at("id").get<std::string>(),
                                          parse_hex64(f.at("prediction").get<std::string>()),
                                          parse_hex64(f.at("labels").get<std::string>())});
    }
    report.provenance.tool_version = prov.at("tool_version").get<std::string>();
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ShapeMismatch, std::string("malformed report: ") + e.what());
  }
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "class,iou";
  for (auto m : report.measures) out << ",ause_" << to_string(m);
  out << ",filtered\n";
  for (const auto& row : report.rows) {
    out << csv_field(row.name) << ',' << csv_number(row.iou);
    for (const auto& a : row.ause) out << ',' << csv_number(a);
    out << ',' << (row.filtered ? "true" : "false") << '\n';
  }
  out << "all," << csv_number(report.miou_present);
  for (const auto& a : report.aggregates) out << ',' << csv_number(a.overall);
  out << ",\n";
  out << "all (filtered),";
  for (const auto& a : report.aggregates) out << ',' << csv_number(a.filtered);
  out << ",\n";
  return out.str();
}

std::string scatter_csv(const ScatterExport& scatter) {
  std::ostringstream out;
  out << "measure,class,iou,ause,outlier,threshold\n";
  const std::string threshold = format_number(scatter.threshold);
  for (const auto& p : scatter.points) {
    out << to_string(p.measure) << ',' << csv_field(p.class_name) << ',' << format_number(p.iou) << ','
        << format_number(p.ause) << ',' << (p.outlier ? "true" : "false") << ',' << threshold << '\n';
  }
  return out.str();
}

std::string curves_csv(const CurvePair& curves) {
  std::ostringstream out;
  out << "fraction,sparsification_error,oracle_error,difference\n";
  for (std::size_t j = 0; j < curves.oracle_error.size(); ++j) {
    const double fraction = static_cast<double>(j) / static_cast<double>(curves.grid_steps);
    out << format_number(fraction) << ',' << format_number(curves.sparsification_error[j]) << ','
        << format_number(curves.oracle_error[j]) << ','
        << format_number(curves.sparsification_error[j] - curves.oracle_error[j]) << '\n';
  }
  return out.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::IoFailure, "cannot move output into place at " + path.string());
  }
}

std::vector<fs::path> write_report(const EvalReport& report, const fs::path& out_dir, ReportFormat format) {
  if (report.rows.empty()) throw Error(ErrorKind::IoFailure, "refusing to write an empty report");
  // Render everything before touching the filesystem.
  std::vector<std::pair<fs::path, std::string>> files;
  if (format != ReportFormat::Csv) files.emplace_back(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
  if (format != ReportFormat::Json) files.emplace_back(out_dir / "report.csv", report_csv(report));
  files.emplace_back(out_dir / "scatter.csv", scatter_csv(scatter_export(report)));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + out_dir.string());
  std::vector<fs::path> written;
  for (const auto& [path, text] : files) {
    write_text_file(path, text);
    written.push_back(path);
  }
  return written;
}

EvalReport read_report(const fs::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + json_path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ShapeMismatch, std::string("report is not valid JSON: ") + e.what());
  }
  return report_from_json(j);
}

}  // namespace ause::io
