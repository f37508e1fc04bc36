#pragma once

// Call-detail-record ingestion: raw CSV parsing, cleaning into a canonical
// EventStream, canonical CSV I/O and a seeded synthetic stream generator.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tgnseal/events.hpp"

namespace tgnseal {

inline constexpr std::string_view kRawCdrHeader = "caller_id,callee_id,unix_ts,direction,duration_s";
inline constexpr std::string_view kEventCsvHeader = "src,dst,ts,f0,f1";
inline constexpr std::size_t kCdrFeatureDim = 2;

enum class CallDirection { in, out };

struct RawCdrRecord {
  std::string caller;
  std::string callee;
  double ts = 0.0;
  CallDirection direction = CallDirection::out;
  double duration_s = 0.0;

  bool operator==(const RawCdrRecord&) const = default;
};

struct ParseReport {
  std::size_t data_rows = 0;  // non-blank lines after the header
  std::size_t skipped = 0;
  std::map<std::string, std::size_t> skip_reasons;
};

struct CdrParseResult {
  std::vector<RawCdrRecord> records;
  ParseReport report;
};

/// Malformed rows are counted and skipped. A missing or different header
/// throws FormatError; an unreadable file throws IoError. LF or CRLF.
CdrParseResult parse_cdr_csv(const std::filesystem::path& path);
CdrParseResult parse_cdr_csv(std::istream& in);

/// Bidirectional external id <-> dense NodeId map, ids assigned 0, 1, ...
class IdMap {
 public:
  NodeId intern(const std::string& external);
  std::optional<NodeId> find(const std::string& external) const;
  const std::string& external(NodeId id) const { return external_.at(id); }
  std::size_t size() const { return external_.size(); }

 private:
  std::unordered_map<std::string, NodeId> to_dense_;
  std::vector<std::string> external_;
};

/// Drops self-calls and exact duplicates (first occurrence kept), then sorts
/// stably by timestamp.
std::vector<RawCdrRecord> clean_records(std::vector<RawCdrRecord> records);

struct CleanedStream {
  EventStream stream;
  IdMap ids;
};

/// clean_records, then densify ids in order of first appearance and build
/// features f0 = ln(1 + duration_s), f1 = 1 for outgoing, 0 for incoming.
CleanedStream clean_events(std::vector<RawCdrRecord> records);

void write_event_csv(std::ostream& out, const EventStream& stream);
void write_event_csv(const std::filesystem::path& path, const EventStream& stream);
/// num_nodes = max id + 1. Throws FormatError with the line number on bad rows.
EventStream read_event_csv(std::istream& in);
EventStream read_event_csv(const std::filesystem::path& path);

struct SyntheticParams {
  double p_repeat = 0.4;   // call a past partner
  double p_triad = 0.4;    // call a neighbour of a neighbour
  double mean_interarrival_s = 60.0;
  double mean_duration_s = 120.0;
  double activity_skew = 1.0;  // caller activity ~ 1 / rank^skew
};

struct SyntheticStats {
  std::size_t repeat = 0;
  std::size_t triad = 0;
  std::size_t uniform = 0;
};

/// Seeded event generator mixing recurrence, triadic closure and uniform
/// calls. When the drawn mechanism has no candidate (no history yet) the
/// event falls back to a uniform callee and is counted as uniform.
EventStream generate_synthetic(std::size_t num_nodes, std::size_t num_events,
                               const SyntheticParams& params, std::uint64_t seed,
                               SyntheticStats* stats = nullptr);

}  // namespace tgnseal
