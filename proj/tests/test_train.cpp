#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "leakage.hpp"
#include "tgnseal/cdr.hpp"
#include "tgnseal/config.hpp"
#include "tgnseal/errors.hpp"
#include "tgnseal/report.hpp"
#include "tgnseal/train.hpp"

using namespace tgnseal;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tgnseal_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunReport sample_report(const std::string& model, std::uint64_t seed, double ap) {
  RunReport r;
  r.model = model;
  r.seed = seed;
  r.ap_seen = ap;
  r.ap_unseen = std::nullopt;
  r.ap_test = ap - 0.01;
  r.loss_curve = {0.7, 0.6};
  r.val_ap_curve = {0.55};
  r.wall_time_s = 1.5;
  r.config = to_json(TrainConfig{});
  return r;
}

}  // namespace

TEST_CASE("query construction") {
  const auto stream = generate_synthetic(20, 40, SyntheticParams{}, 3);
  const auto split = chronological_split(stream, 0.7, 0.15, 0.2, 3);
  const auto batch = stream.events().subspan(5, 10);
  const auto q = build_queries(batch, split, 20, 9, kTagTrainNegatives, 2);
  REQUIRE(q.size() == 30);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Event& e = batch[i];
    CHECK(q[3 * i].label == 1.0);
    CHECK(q[3 * i].u == e.src);
    CHECK(q[3 * i].v == e.dst);
    for (std::size_t j = 1; j <= 2; ++j) {
      const Query& neg = q[3 * i + j];
      CHECK(neg.label == 0.0);
      CHECK(neg.u == e.src);
      CHECK(neg.v != e.src);
      CHECK(neg.v != e.dst);
      CHECK(neg.t == e.ts);
      CHECK(neg.event_idx == e.idx);
      CHECK(neg.unseen == split.touches_unseen(e));
    }
  }
  // Negatives depend on the event, not on where the batch starts.
  const auto again = build_queries(stream.events().subspan(7, 3), split, 20, 9, kTagTrainNegatives, 2);
  for (std::size_t i = 0; i < again.size(); ++i) CHECK(again[i].v == q[6 + i].v);
  const auto other_epoch = build_queries(batch, split, 20, 9, kTagTrainNegatives + 1, 2);
  bool differs = false;
  for (std::size_t i = 0; i < q.size(); ++i) differs = differs || other_epoch[i].v != q[i].v;
  CHECK(differs);
}

TEST_CASE("threaded extraction matches the serial result") {
  const auto stream = generate_synthetic(60, 400, SyntheticParams{}, 5);
  const auto adj = build_adjacency(stream);
  const auto split = chronological_split(stream, 0.7, 0.15, 0.1, 5);
  const auto q = build_queries(stream.events().subspan(300, 50), split, 60, 5, kTagTestNegatives, 1);
  TrainConfig serial;
  TrainConfig parallel;
  parallel.threads = 4;
  const auto a = extract_labelled(q, adj, serial), b = extract_labelled(q, adj, parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].nodes == b[i].nodes);
    CHECK(a[i].adj == b[i].adj);
    CHECK(a[i].labels == b[i].labels);
  }
}

TEST_CASE("no prediction sees its own batch or the future") {
  for (ModelKind kind : {ModelKind::tgn_seal, ModelKind::tgn_id, ModelKind::tgn_time}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      probe::LeakageTally tally;
      probe::check_stream(probe::fuzz_stream(seed), probe::tiny_config(kind), seed, tally);
      INFO(model_name(kind) << " seed " << seed);
      CHECK(tally.predictions > 0);
      CHECK(tally.order_mismatches == 0);
      CHECK(tally.truncation_mismatches == 0);
      CHECK(tally.late_edges == 0);
      CHECK(tally.memory_mismatches == 0);
    }
  }
}

TEST_CASE("experiment partitions") {
  const auto stream = generate_synthetic(40, 200, SyntheticParams{}, 2);
  TrainConfig config = probe::tiny_config(ModelKind::tgn_seal);
  config.unseen_frac = 0.2;
  const Experiment exp(stream, config);
  const auto& split = exp.split();
  CHECK(split.train_end_idx == 140);
  CHECK(split.val_end_idx == 170);
  CHECK(exp.region(Region::val).size() == 30);
  CHECK(exp.region(Region::test).size() == 30);
  for (const Event& e : exp.visible_training()) {
    CHECK_FALSE(split.touches_unseen(e));
    CHECK(e.idx < split.train_end_idx);
  }
  // The training index holds only visible events.
  std::size_t entries = 0;
  for (NodeId v = 0; v < stream.num_nodes(); ++v) entries += exp.training_adjacency().entries(v).size();
  CHECK(entries == 2 * exp.visible_training().size());
  CHECK(exp.choose_sortpool_k() >= 10);

  config.sortpool_k = 17;
  CHECK(Experiment(stream, config).choose_sortpool_k() == 17);

  const auto tiny = generate_synthetic(10, 2, SyntheticParams{}, 1);
  CHECK_THROWS_AS(Experiment(tiny, config), ConfigError);
}

TEST_CASE("training is deterministic") {
  const auto stream = generate_synthetic(20, 50, SyntheticParams{}, 11);
  TrainConfig config = probe::tiny_config(ModelKind::tgn_seal);
  config.epochs = 1;
  const auto a = train_and_evaluate(stream, config).report;
  const auto b = train_and_evaluate(stream, config).report;
  const std::size_t visible = Experiment(stream, config).visible_training().size();
  CHECK(a.loss_curve.size() == (visible + config.batch_size - 1) / config.batch_size);
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(a.val_ap_curve == b.val_ap_curve);
  CHECK(a.ap_test == b.ap_test);

  config.threads = 3;
  const auto threaded = train_and_evaluate(stream, config).report;
  CHECK(threaded.loss_curve == a.loss_curve);

  config.threads = 1;
  config.model = ModelKind::tgn_id;
  const auto s1 = run_experiment(stream, config, 2);
  const auto s2 = run_experiment(stream, config, 2);
  REQUIRE(s1.runs.size() == 2);
  CHECK(s1.runs[1].seed == config.seed + 1);
  for (std::size_t r = 0; r < 2; ++r) {
    auto x = report_to_json(s1.runs[r]), y = report_to_json(s2.runs[r]);
    x["wall_time_s"] = 0;
    y["wall_time_s"] = 0;
    CHECK(x.dump() == y.dump());
  }
}

TEST_CASE("a small stream can be overfit") {
  // Five pairs calling each other in turn among 30 nodes. Apart from each
  // pair's first call, a true event always has a prior edge between its
  // endpoints, so the decoder can drive the training loss close to zero.
  std::vector<Event> events;
  for (std::size_t i = 0; i < 100; ++i) {
    const NodeId a = 2 * (i % 5);
    events.push_back(Event{i, a, a + 1, 1.0 + static_cast<double>(i), {1.0, 1.0}});
  }
  const EventStream stream(std::move(events), 30, 2);
  TrainConfig config = probe::tiny_config(ModelKind::tgn_seal);
  config.lr = 1e-2;
  config.dropout = 0.0;
  config.train_frac = 0.8;
  config.val_frac = 0.1;
  config.unseen_frac = 0.0;
  const Experiment exp(stream, config);
  LinkModel model(config, stream.num_nodes(), stream.feat_dim(), exp.choose_sortpool_k());
  Adam adam(model.parameters(), AdamOptions{.lr = config.lr});
  std::vector<double> losses;
  for (std::size_t epoch = 0; epoch < 30; ++epoch) losses = exp.train_epoch(model, adam, epoch);
  double mean = 0;
  for (double l : losses) mean += l;
  mean /= static_cast<double>(losses.size());
  INFO("final epoch mean BCE " << mean);
  CHECK(mean < 0.1);
}

TEST_CASE("evaluation reports absent subsets") {
  const auto stream = generate_synthetic(30, 120, SyntheticParams{}, 6);
  TrainConfig config = probe::tiny_config(ModelKind::tgn_id);
  config.unseen_frac = 0.0;
  const Experiment exp(stream, config);
  LinkModel model(config, stream.num_nodes(), stream.feat_dim(), 10);
  const auto r = exp.evaluate(model, Region::test);
  REQUIRE(r.ap_all.has_value());
  CHECK(*r.ap_all >= 0.0);
  CHECK(*r.ap_all <= 1.0);
  // unseen_frac = 0 can still hold out nodes that never appear in training.
  CHECK(r.positives_seen + r.positives_unseen == exp.region(Region::test).size());
  CHECK(r.ap_unseen.has_value() == (r.positives_unseen > 0));

  // Evaluating twice is a pure function of the model.
  const auto again = exp.evaluate(model, Region::test);
  CHECK(again.ap_all == r.ap_all);
}

TEST_CASE("model checkpoint round trip") {
  const auto dir = scratch_dir("ckpt");
  const auto stream = generate_synthetic(20, 80, SyntheticParams{}, 4);
  for (ModelKind kind : {ModelKind::tgn_seal, ModelKind::tgn_time}) {
    TrainConfig config = probe::tiny_config(kind);
    config.epochs = 1;
    auto outcome = train_and_evaluate(stream, config);
    outcome.model->save(dir / kCheckpointFile);
    TrainConfig other = config;
    other.seed = 99;
    LinkModel restored(other, stream.num_nodes(), stream.feat_dim(), outcome.model->sortpool_k());
    restored.load(dir / kCheckpointFile);
    const auto pa = outcome.model->parameters(), pb = restored.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i)
      CHECK(std::equal(pa[i].data().begin(), pa[i].data().end(), pb[i].data().begin()));
    CHECK(restored.memory().state() == outcome.model->memory().state());
  }
  fs::remove_all(dir);
}

TEST_CASE("configuration schema") {
  TrainConfig c;
  const auto doc = to_json(c);
  CHECK(doc.size() == config_keys().size());
  const auto back = config_from_json(doc);
  CHECK(to_json(back) == doc);

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"learning_rate", 0.1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"k", "two"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"model", "tgn_foo"}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"k", 4}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), ConfigError);

  apply_override(c, "lr=0.003");
  apply_override(c, "model=tgn_time");
  apply_override(c, "gc_channels=[16,1]");
  CHECK(c.lr == 0.003);
  CHECK(c.model == ModelKind::tgn_time);
  CHECK(c.gc_channels == std::vector<std::size_t>{16, 1});
  CHECK(c.node_embedding() == EmbeddingKind::time_projection);
  CHECK_THROWS_AS(apply_override(c, "lr"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "batch_size=0"), ConfigError);

  const std::string help = describe_config_keys();
  for (const auto& key : config_keys()) CHECK(help.find(key.name) != std::string::npos);

  const auto dir = scratch_dir("config");
  std::ofstream(dir / "cfg.json") << R"({"model": "tgn_id", "epochs": 3})";
  const auto loaded = load_config(dir / "cfg.json");
  CHECK(loaded.model == ModelKind::tgn_id);
  CHECK(loaded.epochs == 3);
  std::ofstream(dir / "bad.json") << "{not json";
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("reports, curves and comparison") {
  const auto r = sample_report("tgn_seal", 3, 0.8);
  const auto back = report_from_json(report_to_json(r));
  CHECK(report_to_json(back) == report_to_json(r));
  CHECK_FALSE(back.ap_unseen.has_value());
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"model", "x"}}), FormatError);

  const auto dir = scratch_dir("reports");
  for (int s = 0; s < 3; ++s) {
    fs::create_directories(dir / "a" / ("run" + std::to_string(s)));
    fs::create_directories(dir / "b" / ("run" + std::to_string(s)));
    write_report(dir / "a" / ("run" + std::to_string(s)) / kReportFile, sample_report("tgn_seal", s, 0.9 + 0.01 * s));
    write_report(dir / "b" / ("run" + std::to_string(s)) / kReportFile, sample_report("tgn_id", s, 0.5 + 0.01 * s));
  }
  const auto a = load_reports(dir / "a"), b = load_reports(dir / "b");
  CHECK(a.size() == 3);
  CHECK(a[2].seed == 2);
  CHECK_THROWS_AS(load_reports(dir / "missing"), IoError);

  const auto cmp = compare_reports(a, b, "ap_seen", Alternative::two_sided);
  CHECK(cmp.n_a == 3);
  CHECK(cmp.a.mean == doctest::Approx(0.91));
  CHECK(cmp.test.u == 9.0);
  CHECK(cmp.test.p == doctest::Approx(0.1));
  CHECK_THROWS_AS(compare_reports(a, b, "ap_unseen", Alternative::two_sided), ConfigError);
  CHECK_THROWS_AS(metric_value(a[0], "auc"), ConfigError);

  const std::string csv = curves_csv(a);
  CHECK(csv.rfind(std::string(kCurveCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("0,loss/tgn_seal/seed0,0.7\n") != std::string::npos);
  CHECK(csv.find("0,val_ap/tgn_seal/seed2,0.55\n") != std::string::npos);

  ExperimentSummary summary;
  summary.runs = a;
  summary.ap_seen = mean_std(std::vector<double>{0.5, 0.7});
  CHECK(summary_to_json(summary)["ap_seen"]["mean"].get<double>() == doctest::Approx(0.6));
  fs::remove_all(dir);
}
