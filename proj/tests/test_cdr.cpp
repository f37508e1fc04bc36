#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tgnseal/cdr.hpp"
#include "tgnseal/errors.hpp"

using namespace tgnseal;

namespace {

CdrParseResult parse(const std::string& text) {
  std::istringstream in(text);
  return parse_cdr_csv(in);
}

const std::string kHeader = "caller_id,callee_id,unix_ts,direction,duration_s\n";

}  // namespace

TEST_CASE("raw csv parsing") {
  const auto empty = parse(kHeader);
  CHECK(empty.records.empty());
  CHECK(empty.report.skipped == 0);

  const auto r = parse(kHeader +
                       "alice,bob,100,out,30\r\n"
                       "bob,carol,50.5,in,0\n"
                       "\n"
                       "carol,alice,75,out,12.25\n"
                       "dave,erin,80,out,-1\n");
  CHECK(r.records.size() == 3);
  CHECK(r.report.data_rows == 4);
  CHECK(r.report.skipped == 1);
  CHECK(r.report.skip_reasons.at("negative duration") == 1);
  CHECK(r.records[1] == RawCdrRecord{"bob", "carol", 50.5, CallDirection::in, 0.0});

  const auto bad = parse(kHeader + "a,b,1,out\n,b,1,out,1\na,b,x,out,1\na,b,1,sideways,1\na,b,1,in,q\n");
  CHECK(bad.records.empty());
  CHECK(bad.report.skipped == 5);
  CHECK(bad.report.skip_reasons.size() == 5);

  CHECK_THROWS_AS(parse("wrong,header\n"), FormatError);
  CHECK_THROWS_AS(parse(""), FormatError);
  CHECK_THROWS_AS(parse_cdr_csv(std::filesystem::path("/nonexistent/raw.csv")), IoError);
}

TEST_CASE("cleaning") {
  const RawCdrRecord self{"a", "a", 1, CallDirection::out, 5};
  CHECK(clean_events({self}).stream.empty());

  const RawCdrRecord r1{"a", "b", 10, CallDirection::out, 5};
  CHECK(clean_events({r1, r1}).stream.size() == 1);

  const RawCdrRecord r2{"c", "a", 5, CallDirection::in, 0};
  const RawCdrRecord r3{"b", "c", 7, CallDirection::out, std::exp(1.0) - 1.0};
  const auto cleaned = clean_events({r1, r2, r3});
  const auto& s = cleaned.stream;
  REQUIRE(s.size() == 3);
  CHECK(s[0].ts == 5);
  CHECK(s[1].ts == 7);
  CHECK(s[2].ts == 10);
  CHECK(s.num_nodes() == 3);
  CHECK(cleaned.ids.size() == 3);
  // Ids follow first appearance in time order: c, a, b.
  CHECK(cleaned.ids.external(s[0].src) == "c");
  CHECK(cleaned.ids.find("a") == std::optional<NodeId>(s[0].dst));
  CHECK(s[0].feats == std::vector<double>{0.0, 0.0});
  CHECK(s[1].feats[0] == doctest::Approx(1.0));
  CHECK(s[1].feats[1] == 1.0);
}

TEST_CASE("id map is a dense bijection") {
  IdMap ids;
  CHECK(ids.intern("x") == 0);
  CHECK(ids.intern("y") == 1);
  CHECK(ids.intern("x") == 0);
  CHECK(ids.external(1) == "y");
  CHECK_FALSE(ids.find("z").has_value());
}

TEST_CASE("canonical event csv round trip") {
  const auto stream = generate_synthetic(30, 200, SyntheticParams{}, 4);
  std::stringstream buf;
  write_event_csv(buf, stream);
  const std::string text = buf.str();
  CHECK(text.rfind("src,dst,ts,f0,f1\n", 0) == 0);
  const auto back = read_event_csv(buf);
  CHECK(back.size() == stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) CHECK(back[i] == stream[i]);

  std::istringstream broken("src,dst,ts,f0,f1\n0,1,2,3,4\n0,1,x,3,4\n");
  try {
    read_event_csv(broken);
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("synthetic generator") {
  const auto one = generate_synthetic(10, 1, SyntheticParams{}, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].src < 10);
  CHECK(one[0].dst < 10);

  std::stringstream a, b;
  write_event_csv(a, generate_synthetic(50, 500, SyntheticParams{}, 42));
  write_event_csv(b, generate_synthetic(50, 500, SyntheticParams{}, 42));
  CHECK(a.str() == b.str());

  CHECK_THROWS_AS(generate_synthetic(2, 10, SyntheticParams{}, 1), ConfigError);
  CHECK_THROWS_AS(generate_synthetic(10, 0, SyntheticParams{}, 1), ConfigError);
  SyntheticParams bad;
  bad.p_repeat = 0.7;
  bad.p_triad = 0.7;
  CHECK_THROWS_AS(generate_synthetic(10, 10, bad, 1), ConfigError);
}

TEST_CASE("triadic closure share follows p_triad") {
  SyntheticParams p;
  p.p_repeat = 0.4;
  p.p_triad = 0.6;
  SyntheticStats stats;
  const auto stream = generate_synthetic(300, 10000, p, 17, &stats);
  CHECK(stats.repeat + stats.triad + stats.uniform == 10000);
  const double share = static_cast<double>(stats.triad) / 10000.0;
  CHECK(share == doctest::Approx(0.6).epsilon(0.05 / 0.6));

  // Every event counted as a closure must really close a wedge in the prior
  // history: dst is a neighbour of some earlier neighbour of src.
  std::vector<std::set<NodeId>> seen(stream.num_nodes());
  std::size_t closing = 0;
  for (const Event& e : stream.events()) {
    bool wedge = false;
    for (NodeId mid : seen[e.src])
      if (seen[mid].count(e.dst)) wedge = true;
    if (wedge) ++closing;
    seen[e.src].insert(e.dst);
    seen[e.dst].insert(e.src);
  }
  CHECK(closing >= stats.triad);
}
