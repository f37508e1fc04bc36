#include "tgnseal/cdr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <tuple>

#include "tgnseal/errors.hpp"

namespace tgnseal {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return value;
}

std::string format_double(double v, std::chars_format fmt) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, fmt);
  if (ec != std::errc()) throw FormatError("cannot format value");
  return std::string(buf, ptr);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

CdrParseResult parse_cdr_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kRawCdrHeader)
    throw FormatError("raw CDR csv: expected header '" + std::string(kRawCdrHeader) + "'");

  CdrParseResult result;
  auto skip = [&result](const char* reason) {
    ++result.report.skipped;
    ++result.report.skip_reasons[reason];
  };
  while (std::getline(in, line)) {
    const std::string_view row = strip_cr(line);
    if (row.empty()) continue;
    ++result.report.data_rows;
    const auto fields = split_fields(row);
    if (fields.size() != 5) {
      skip("wrong field count");
      continue;
    }
    if (fields[0].empty() || fields[1].empty()) {
      skip("empty id");
      continue;
    }
    const auto ts = parse_number<double>(fields[2]);
    if (!ts || !std::isfinite(*ts)) {
      skip("bad timestamp");
      continue;
    }
    CallDirection dir;
    if (fields[3] == "in") {
      dir = CallDirection::in;
    } else if (fields[3] == "out") {
      dir = CallDirection::out;
    } else {
      skip("bad direction");
      continue;
    }
    const auto duration = parse_number<double>(fields[4]);
    if (!duration || !std::isfinite(*duration)) {
      skip("bad duration");
      continue;
    }
    if (*duration < 0.0) {
      skip("negative duration");
      continue;
    }
    result.records.push_back(
        {std::string(fields[0]), std::string(fields[1]), *ts, dir, *duration});
  }
  if (in.bad()) throw IoError("read error while parsing raw CDR csv");
  return result;
}

CdrParseResult parse_cdr_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_cdr_csv(in);
}

NodeId IdMap::intern(const std::string& external) {
  auto [it, inserted] = to_dense_.try_emplace(external, static_cast<NodeId>(external_.size()));
  if (inserted) external_.push_back(external);
  return it->second;
}

std::optional<NodeId> IdMap::find(const std::string& external) const {
  auto it = to_dense_.find(external);
  if (it == to_dense_.end()) return std::nullopt;
  return it->second;
}

std::vector<RawCdrRecord> clean_records(std::vector<RawCdrRecord> records) {
  using Key = std::tuple<std::string, std::string, double, CallDirection, double>;
  std::set<Key> seen;
  std::vector<RawCdrRecord> kept;
  kept.reserve(records.size());
  for (RawCdrRecord& r : records) {
    if (r.caller == r.callee) continue;
    if (!seen.emplace(r.caller, r.callee, r.ts, r.direction, r.duration_s).second) continue;
    kept.push_back(std::move(r));
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const RawCdrRecord& a, const RawCdrRecord& b) { return a.ts < b.ts; });
  return kept;
}

CleanedStream clean_events(std::vector<RawCdrRecord> records) {
  const auto kept = clean_records(std::move(records));
  IdMap ids;
  std::vector<Event> events;
  events.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const RawCdrRecord& r = kept[i];
    Event e;
    e.idx = i;
    e.src = ids.intern(r.caller);
    e.dst = ids.intern(r.callee);
    e.ts = r.ts;
    e.feats = {std::log1p(r.duration_s), r.direction == CallDirection::out ? 1.0 : 0.0};
    events.push_back(std::move(e));
  }
  const std::size_t n = ids.size();
  return {EventStream(std::move(events), n, kCdrFeatureDim), std::move(ids)};
}

void write_event_csv(std::ostream& out, const EventStream& stream) {
  if (stream.feat_dim() != kCdrFeatureDim)
    throw FormatError("canonical event csv carries exactly 2 features");
  out << kEventCsvHeader << '\n';
  for (const Event& e : stream.events()) {
    out << e.src << ',' << e.dst << ',' << format_double(e.ts, std::chars_format::fixed) << ','
        << format_double(e.feats[0], std::chars_format::general) << ','
        << format_double(e.feats[1], std::chars_format::general) << '\n';
  }
}

void write_event_csv(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_event_csv(out, stream);
  if (!out) throw IoError("failed writing " + path.string());
}

EventStream read_event_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kEventCsvHeader)
    throw FormatError("event csv: expected header '" + std::string(kEventCsvHeader) + "'");
  std::vector<Event> events;
  std::size_t num_nodes = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = strip_cr(line);
    if (row.empty()) continue;
    const auto f = split_fields(row);
    const auto src = f.size() == 5 ? parse_number<NodeId>(f[0]) : std::nullopt;
    const auto dst = f.size() == 5 ? parse_number<NodeId>(f[1]) : std::nullopt;
    const auto ts = f.size() == 5 ? parse_number<double>(f[2]) : std::nullopt;
    const auto f0 = f.size() == 5 ? parse_number<double>(f[3]) : std::nullopt;
    const auto f1 = f.size() == 5 ? parse_number<double>(f[4]) : std::nullopt;
    if (!src || !dst || !ts || !f0 || !f1)
      throw FormatError("event csv line " + std::to_string(line_no) + ": malformed row");
    Event e;
    e.idx = events.size();
    e.src = *src;
    e.dst = *dst;
    e.ts = *ts;
    e.feats = {*f0, *f1};
    num_nodes = std::max<std::size_t>(num_nodes, std::max(*src, *dst) + std::size_t{1});
    events.push_back(std::move(e));
  }
  if (in.bad()) throw IoError("read error while parsing event csv");
  return EventStream(std::move(events), num_nodes, kCdrFeatureDim);
}

EventStream read_event_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_event_csv(in);
}

}  // namespace tgnseal
