// tgnseal command-line entry point.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.
// Errors go to stderr prefixed with "error:".

#include <malloc.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tgnseal/cdr.hpp"
#include "tgnseal/config.hpp"
#include "tgnseal/errors.hpp"
#include "tgnseal/report.hpp"
#include "tgnseal/seal.hpp"
#include "tgnseal/train.hpp"

using namespace tgnseal;
namespace fs = std::filesystem;

namespace {

constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

constexpr const char* kSummaryFile = "summary.json";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

TrainConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides,
                           TrainConfig base = {}) {
  TrainConfig config = config_path.empty() ? base : load_config(config_path);
  for (const std::string& o : overrides) apply_override(config, o);
  config.validate();
  return config;
}

void print_summary(std::ostream& os, const ExperimentSummary& s) {
  auto show = [&](const char* name, const MeanStd& m) {
    os << "  " << name << " " << m.mean << " +- " << m.std << '\n';
  };
  os << "runs " << s.runs.size() << '\n';
  show("ap_test  ", s.ap_test);
  show("ap_seen  ", s.ap_seen);
  show("ap_unseen", s.ap_unseen);
}

std::string optional_text(const std::optional<double>& v) {
  if (!v) return "absent";
  std::ostringstream os;
  os.precision(6);
  os << *v;
  return os.str();
}

// "u,v,t" -> query triple.
Query parse_query(const std::string& text) {
  std::istringstream in(text);
  Query q;
  char c1 = 0, c2 = 0;
  if (!(in >> q.u >> c1 >> q.v >> c2 >> q.t) || c1 != ',' || c2 != ',' || !(in >> std::ws).eof())
    throw ConfigError("subgraph query must look like U,V,T (got '" + text + "')");
  return q;
}

struct Options {
  // ingest
  std::string raw_input, ingest_output, ids_output;
  // synth
  std::size_t synth_nodes = 500, synth_events = 5000;
  std::uint64_t synth_seed = 0;
  SyntheticParams synth;
  std::string synth_output;
  // train / eval
  std::string events, config_path, out_dir, run_dir, region = "test", dump_query;
  std::vector<std::string> overrides;
  std::size_t runs = 1;
  // compare
  std::string dir_a, dir_b, metric = "ap_unseen", alternative = "two-sided";
  // export-curves
  std::vector<std::string> curve_inputs;
  std::string curve_output;
};

int run_ingest(const Options& o) {
  auto parsed = parse_cdr_csv(fs::path(o.raw_input));
  const auto cleaned = clean_events(std::move(parsed.records));
  write_event_csv(fs::path(o.ingest_output), cleaned.stream);
  if (!o.ids_output.empty()) {
    std::ostringstream ids;
    ids << "node_id,external_id\n";
    for (NodeId v = 0; v < cleaned.ids.size(); ++v) ids << v << ',' << cleaned.ids.external(v) << '\n';
    write_text(o.ids_output, ids.str());
  }
  std::cout << "rows " << parsed.report.data_rows << " skipped " << parsed.report.skipped << " events "
            << cleaned.stream.size() << " nodes " << cleaned.stream.num_nodes() << '\n';
  for (const auto& [reason, count] : parsed.report.skip_reasons)
    std::cout << "  skipped " << count << ": " << reason << '\n';
  return 0;
}

int run_synth(const Options& o) {
  SyntheticStats stats;
  const auto stream = generate_synthetic(o.synth_nodes, o.synth_events, o.synth, o.synth_seed, &stats);
  write_event_csv(fs::path(o.synth_output), stream);
  std::cout << "events " << stream.size() << " nodes " << stream.num_nodes() << " repeat " << stats.repeat
            << " triad " << stats.triad << " uniform " << stats.uniform << '\n';
  return 0;
}

int run_train(const Options& o) {
  const TrainConfig config = resolve_config(o.config_path, o.overrides);
  if (o.runs == 0) throw ConfigError("--runs must be at least 1");
  const EventStream stream = read_event_csv(fs::path(o.events));
  const fs::path out(o.out_dir);
  fs::create_directories(out);

  ExperimentSummary summary;
  std::vector<double> seen, unseen, test;
  for (std::size_t r = 0; r < o.runs; ++r) {
    TrainConfig run = config;
    run.seed = config.seed + r;
    const fs::path dir = o.runs == 1 ? out : out / ("seed" + std::to_string(run.seed));
    fs::create_directories(dir);
    RunOutcome outcome = train_and_evaluate(stream, run);
    // Written as soon as each run finishes so partial results survive a failure.
    write_report(dir / kReportFile, outcome.report);
    outcome.model->save(dir / kCheckpointFile);
    const RunReport& rep = outcome.report;
    std::cout << model_name(run.model) << " seed " << run.seed << " ap_test " << optional_text(rep.ap_test)
              << " ap_seen " << optional_text(rep.ap_seen) << " ap_unseen " << optional_text(rep.ap_unseen)
              << " epochs " << rep.val_ap_curve.size() << " best " << rep.best_epoch << '\n';
    if (rep.ap_seen) seen.push_back(*rep.ap_seen);
    if (rep.ap_unseen) unseen.push_back(*rep.ap_unseen);
    if (rep.ap_test) test.push_back(*rep.ap_test);
    summary.runs.push_back(rep);
  }
  summary.ap_seen = mean_std(seen);
  summary.ap_unseen = mean_std(unseen);
  summary.ap_test = mean_std(test);
  write_text(out / kSummaryFile, summary_to_json(summary).dump(2) + "\n");
  print_summary(std::cout, summary);
  return 0;
}

int run_dump(const Options& o, const TrainConfig& config, const EventStream& stream) {
  const Query q = parse_query(o.dump_query);
  if (q.u >= stream.num_nodes() || q.v >= stream.num_nodes())
    throw ConfigError("subgraph query names a node outside the stream");
  auto sub = extract_enclosing_subgraph(build_adjacency(stream), q.u, q.v, q.t, config.k, config.cap);
  label_subgraph(sub, static_cast<int>(config.l_max));
  std::cout << dump_subgraph(sub);
  return 0;
}

int run_eval(const Options& o) {
  const EventStream stream = read_event_csv(fs::path(o.events));
  if (!o.dump_query.empty() && o.run_dir.empty())
    return run_dump(o, resolve_config(o.config_path, o.overrides), stream);
  if (o.run_dir.empty()) throw ConfigError("eval needs --run (or --dump-subgraph)");

  const fs::path dir(o.run_dir);
  const RunReport saved = read_report(dir / kReportFile);
  const TrainConfig config = resolve_config(o.config_path, o.overrides, config_from_json(saved.config));
  if (!o.dump_query.empty()) return run_dump(o, config, stream);

  Region region;
  if (o.region == "test") region = Region::test;
  else if (o.region == "val") region = Region::val;
  else throw ConfigError("--region must be val or test");

  const Experiment exp(stream, config);
  LinkModel model(config, stream.num_nodes(), stream.feat_dim(), saved.sortpool_k);
  model.load(dir / kCheckpointFile);
  const EvalResult r = exp.evaluate(model, region);
  std::cout << "region " << o.region << " ap_all " << optional_text(r.ap_all) << " ap_seen "
            << optional_text(r.ap_seen) << " ap_unseen " << optional_text(r.ap_unseen) << " positives_seen "
            << r.positives_seen << " positives_unseen " << r.positives_unseen << '\n';
  return 0;
}

int run_compare(const Options& o) {
  const auto a = load_reports(o.dir_a);
  const auto b = load_reports(o.dir_b);
  const Comparison c = compare_reports(a, b, o.metric, parse_alternative(o.alternative));
  std::cout.precision(6);
  std::cout << "metric " << c.metric << '\n'
            << "a n " << c.n_a << " mean " << c.a.mean << " std " << c.a.std << '\n'
            << "b n " << c.n_b << " mean " << c.b.mean << " std " << c.b.std << '\n'
            << "U " << c.test.u << " p " << c.test.p << " alternative " << o.alternative
            << (c.test.exact ? " exact" : " normal") << '\n';
  return 0;
}

int run_export(const Options& o) {
  std::vector<RunReport> all;
  for (const std::string& in : o.curve_inputs) {
    auto part = load_reports(in);
    all.insert(all.end(), part.begin(), part.end());
  }
  const std::string csv = curves_csv(all);
  if (o.curve_output.empty() || o.curve_output == "-") std::cout << csv;
  else write_text(o.curve_output, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Tensor temporaries are large and short-lived; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Temporal link prediction with memory-aware enclosing subgraphs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tgnseal 1.0");
  Options o;

  auto* ingest = app.add_subcommand("ingest", "Clean a raw call-detail CSV into a canonical event CSV");
  ingest->add_option("--input", o.raw_input, "Raw CSV: " + std::string(kRawCdrHeader))->required();
  ingest->add_option("--output", o.ingest_output, "Canonical event CSV to write")->required();
  ingest->add_option("--ids", o.ids_output, "Optional node id map CSV to write");

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic event stream");
  synth->add_option("--nodes", o.synth_nodes, "Number of nodes")->capture_default_str();
  synth->add_option("--events", o.synth_events, "Number of events")->capture_default_str();
  synth->add_option("--seed", o.synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--p-repeat", o.synth.p_repeat, "Probability of calling a past partner")->capture_default_str();
  synth->add_option("--p-triad", o.synth.p_triad, "Probability of closing a triangle")->capture_default_str();
  synth->add_option("--mean-interarrival", o.synth.mean_interarrival_s, "Mean seconds between events")
      ->capture_default_str();
  synth->add_option("--mean-duration", o.synth.mean_duration_s, "Mean call duration")->capture_default_str();
  synth->add_option("--activity-skew", o.synth.activity_skew, "Caller activity exponent")->capture_default_str();
  synth->add_option("--output", o.synth_output, "Canonical event CSV to write")->required();

  const std::string keys = "Configuration keys (JSON file and --set):\n" + describe_config_keys();
  auto* train = app.add_subcommand("train", "Train, early-stop on validation AP, evaluate on test");
  train->add_option("--events", o.events, "Canonical event CSV")->required();
  train->add_option("--config", o.config_path, "Flat JSON configuration");
  train->add_option("--set", o.overrides, "Override one key, key=value (repeatable)");
  train->add_option("--runs", o.runs, "Independent runs with seeds seed, seed+1, ...")->capture_default_str();
  train->add_option("--out", o.out_dir, "Output directory")->required();
  train->footer(keys);

  auto* eval = app.add_subcommand("eval", "Re-evaluate a saved run, or dump one enclosing subgraph");
  eval->add_option("--events", o.events, "Canonical event CSV")->required();
  eval->add_option("--run", o.run_dir, "Directory holding report.json and model.ckpt");
  eval->add_option("--region", o.region, "val or test")->capture_default_str();
  eval->add_option("--config", o.config_path, "Flat JSON configuration (dump mode without --run)");
  eval->add_option("--set", o.overrides, "Override one key, key=value (repeatable)");
  eval->add_option("--dump-subgraph", o.dump_query, "Print the labelled subgraph for query U,V,T and exit");
  eval->footer(keys);

  auto* compare = app.add_subcommand("compare", "Mann-Whitney U test between two sets of runs");
  compare->add_option("--a", o.dir_a, "Run directory (searched recursively for report.json)")->required();
  compare->add_option("--b", o.dir_b, "Run directory (searched recursively for report.json)")->required();
  compare->add_option("--metric", o.metric, "ap_seen, ap_unseen or ap_test")->capture_default_str();
  compare->add_option("--alternative", o.alternative, "two-sided, greater or less")->capture_default_str();

  auto* curves = app.add_subcommand("export-curves", "Loss and validation-AP curves as CSV");
  curves->add_option("--runs", o.curve_inputs, "Run directories (repeatable)")->required();
  curves->add_option("--output", o.curve_output, "CSV path, or - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    if (*ingest) return run_ingest(o);
    if (*synth) return run_synth(o);
    if (*train) return run_train(o);
    if (*eval) return run_eval(o);
    if (*compare) return run_compare(o);
    if (*curves) return run_export(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
