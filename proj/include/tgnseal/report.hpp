#pragma once

// Per-run report documents, curve export and between-model comparison.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgnseal/metrics.hpp"
#include "tgnseal/train.hpp"

namespace tgnseal {

inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kCurveCsvHeader = "epoch_or_batch,series,value";

nlohmann::json report_to_json(const RunReport& report);
/// Throws FormatError when a required key is missing or mistyped.
RunReport report_from_json(const nlohmann::json& doc);

/// Pretty-printed, key-sorted JSON plus a trailing newline.
void write_report(const std::filesystem::path& path, const RunReport& report);
RunReport read_report(const std::filesystem::path& path);

/// `root`/report.json if present, else every report.json below `root`, in
/// path order. Throws IoError if none is found.
std::vector<RunReport> load_reports(const std::filesystem::path& root);

/// "ap_seen", "ap_unseen" or "ap_test"; ConfigError otherwise.
std::optional<double> metric_value(const RunReport& report, const std::string& metric);

nlohmann::json summary_to_json(const ExperimentSummary& summary);

/// Rows "<batch>,loss/<model>/seed<seed>,<value>" and
/// "<epoch>,val_ap/<model>/seed<seed>,<value>" after the header line.
std::string curves_csv(std::span<const RunReport> reports);

struct Comparison {
  std::string metric;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  MeanStd a;
  MeanStd b;
  MannWhitneyResult test;
};

/// Runs lacking the metric are skipped; ConfigError if a side ends up empty.
Comparison compare_reports(std::span<const RunReport> a, std::span<const RunReport> b,
                           const std::string& metric, Alternative alternative);

}  // namespace tgnseal
