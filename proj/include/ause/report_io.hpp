#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ause/pipeline.hpp"
#include "ause/sparsification.hpp"

namespace ause::io {

enum class ReportFormat { Csv, Json, Both };

// Shortest decimal string that parses back to the same double.
std::string format_number(double value);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// One row per class (class, iou, ause_<measure>..., filtered), then the
// "all" and "all (filtered)" aggregate rows.
std::string report_csv(const EvalReport& report);
std::string scatter_csv(const ScatterExport& scatter);
std::string curves_csv(const CurvePair& curves);

// Writes report.json / report.csv and scatter.csv into `out_dir` (created if
// missing). Throws IoFailure for an empty report; never writes partial files.
std::vector<std::filesystem::path> write_report(const EvalReport& report, const std::filesystem::path& out_dir,
                                                ReportFormat format);
EvalReport read_report(const std::filesystem::path& json_path);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ause::io
