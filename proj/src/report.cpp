#include "tgnseal/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tgnseal/errors.hpp"

namespace tgnseal {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& doc, const char* key) {
  const json& v = doc.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_number()) throw FormatError(std::string("report key '") + key + "' must be a number or null");
  return v.get<double>();
}

std::vector<double> read_series(const json& doc, const char* key) {
  const json& v = doc.at(key);
  if (!v.is_array()) throw FormatError(std::string("report key '") + key + "' must be an array");
  std::vector<double> out;
  for (const json& x : v) {
    if (!x.is_number()) throw FormatError(std::string("report key '") + key + "' holds a non-number");
    out.push_back(x.get<double>());
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

json report_to_json(const RunReport& r) {
  return json{{"model", r.model},
              {"seed", r.seed},
              {"ap_seen", optional_number(r.ap_seen)},
              {"ap_unseen", optional_number(r.ap_unseen)},
              {"ap_test", optional_number(r.ap_test)},
              {"loss_curve", r.loss_curve},
              {"val_ap_curve", r.val_ap_curve},
              {"wall_time_s", r.wall_time_s},
              {"config", r.config},
              {"best_epoch", r.best_epoch},
              {"sortpool_k", r.sortpool_k}};
}

RunReport report_from_json(const json& doc) {
  try {
    RunReport r;
    r.model = doc.at("model").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.ap_seen = read_optional(doc, "ap_seen");
    r.ap_unseen = read_optional(doc, "ap_unseen");
    r.ap_test = doc.contains("ap_test") ? read_optional(doc, "ap_test") : std::nullopt;
    r.loss_curve = read_series(doc, "loss_curve");
    r.val_ap_curve = read_series(doc, "val_ap_curve");
    r.wall_time_s = doc.at("wall_time_s").get<double>();
    r.config = doc.at("config");
    if (!r.config.is_object()) throw FormatError("report key 'config' must be an object");
    r.best_epoch = doc.value("best_epoch", std::size_t{0});
    r.sortpool_k = doc.value("sortpool_k", std::size_t{0});
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

void write_report(const std::filesystem::path& path, const RunReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

RunReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw FormatError(path.string() + " is not valid JSON");
  return report_from_json(doc);
}

std::vector<RunReport> load_reports(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(root)) return {read_report(root)};
  if (fs::is_regular_file(root / kReportFile)) return {read_report(root / kReportFile)};
  if (!fs::is_directory(root)) throw IoError("no such directory " + root.string());
  std::vector<fs::path> found;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file() && entry.path().filename() == kReportFile) found.push_back(entry.path());
  if (found.empty()) throw IoError("no " + std::string(kReportFile) + " under " + root.string());
  std::sort(found.begin(), found.end());
  std::vector<RunReport> out;
  for (const auto& p : found) out.push_back(read_report(p));
  return out;
}

std::optional<double> metric_value(const RunReport& report, const std::string& metric) {
  if (metric == "ap_seen") return report.ap_seen;
  if (metric == "ap_unseen") return report.ap_unseen;
  if (metric == "ap_test") return report.ap_test;
  throw ConfigError("unknown metric '" + metric + "' (ap_seen, ap_unseen, ap_test)");
}

json summary_to_json(const ExperimentSummary& s) {
  auto ms = [](const MeanStd& m) { return json{{"mean", m.mean}, {"std", m.std}}; };
  json seeds = json::array();
  for (const RunReport& r : s.runs) seeds.push_back(r.seed);
  return json{{"runs", s.runs.size()},
              {"model", s.runs.empty() ? "" : s.runs.front().model},
              {"seeds", seeds},
              {"ap_seen", ms(s.ap_seen)},
              {"ap_unseen", ms(s.ap_unseen)},
              {"ap_test", ms(s.ap_test)}};
}

std::string curves_csv(std::span<const RunReport> reports) {
  std::ostringstream os;
  os << kCurveCsvHeader << '\n';
  for (const RunReport& r : reports) {
    const std::string suffix = "/" + r.model + "/seed" + std::to_string(r.seed);
    for (std::size_t i = 0; i < r.loss_curve.size(); ++i)
      os << i << ",loss" << suffix << ',' << format_double(r.loss_curve[i]) << '\n';
    for (std::size_t i = 0; i < r.val_ap_curve.size(); ++i)
      os << i << ",val_ap" << suffix << ',' << format_double(r.val_ap_curve[i]) << '\n';
  }
  return os.str();
}

Comparison compare_reports(std::span<const RunReport> a, std::span<const RunReport> b,
                           const std::string& metric, Alternative alternative) {
  auto collect = [&](std::span<const RunReport> runs) {
    std::vector<double> v;
    for (const RunReport& r : runs)
      if (auto x = metric_value(r, metric)) v.push_back(*x);
    return v;
  };
  const auto va = collect(a), vb = collect(b);
  if (va.empty() || vb.empty())
    throw ConfigError("metric '" + metric + "' is absent from every run on one side");
  Comparison c;
  c.metric = metric;
  c.n_a = va.size();
  c.n_b = vb.size();
  c.a = mean_std(va);
  c.b = mean_std(vb);
  c.test = mann_whitney_u(va, vb, alternative);
  return c;
}

}  // namespace tgnseal
