#include "tgnseal/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "tgnseal/checkpoint.hpp"
#include "tgnseal/errors.hpp"

namespace tgnseal {

std::vector<Query> build_queries(std::span<const Event> batch, const SplitSpec& split,
                                 std::size_t num_nodes, std::uint64_t seed, std::uint64_t tag,
                                 std::size_t neg_per_pos) {
  if (num_nodes < 3) throw ConfigError("negative sampling needs at least 3 nodes");
  std::vector<Query> out;
  out.reserve(batch.size() * (1 + neg_per_pos));
  for (const Event& e : batch) {
    const bool unseen = split.touches_unseen(e);
    out.push_back({e.src, e.dst, e.ts, 1.0, e.idx, unseen});
    auto rng = derive_rng(seed, tag, e.idx);
    for (std::size_t j = 0; j < neg_per_pos; ++j) {
      NodeId w = sample_negative(rng, num_nodes, e.dst);
      while (w == e.src) w = sample_negative(rng, num_nodes, e.dst);
      out.push_back({e.src, w, e.ts, 0.0, e.idx, unseen});
    }
  }
  return out;
}

std::vector<EnclosingSubgraph> extract_labelled(std::span<const Query> queries,
                                                const TemporalAdjacency& adj,
                                                const TrainConfig& config) {
  std::vector<EnclosingSubgraph> subs(queries.size());
  const auto l_max = static_cast<int>(config.l_max);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Query& q = queries[i];
      subs[i] = extract_enclosing_subgraph(adj, q.u, q.v, q.t, config.k, config.cap);
      label_subgraph(subs[i], l_max);
    }
  };
  const std::size_t workers = std::min(config.threads, queries.size());
  if (workers <= 1) {
    work(0, queries.size());
    return subs;
  }
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (queries.size() + workers - 1) / workers;
    for (std::size_t begin = 0; begin < queries.size(); begin += chunk)
      pool.emplace_back(work, begin, std::min(queries.size(), begin + chunk));
  }
  return subs;
}

// ---- model ---------------------------------------------------------------

namespace {

std::vector<double> labels_of(std::span<const Query> queries) {
  std::vector<double> y;
  y.reserve(queries.size());
  for (const Query& q : queries) y.push_back(q.label);
  return y;
}

template <typename Fn>
void for_each_batch(std::span<const Event> events, std::size_t batch_size, Fn&& fn) {
  for (std::size_t begin = 0; begin < events.size(); begin += batch_size)
    fn(events.subspan(begin, std::min(batch_size, events.size() - begin)));
}

}  // namespace

LinkModel::LinkModel(const TrainConfig& config, std::size_t num_nodes, std::size_t feat_dim,
                     std::size_t sortpool_k)
    : config_(config),
      sortpool_k_(sortpool_k),
      memory_rng_(derive_rng(config.seed, kTagInit, 0)),
      memory_(num_nodes, MemoryConfig{config.d_mem, config.d_time, feat_dim, config.aggregation},
              memory_rng_) {
  config_.validate();
  w_proj_ = Tensor::zeros({1, config_.d_mem},
                          config_.node_embedding() == EmbeddingKind::time_projection);
  auto rng = derive_rng(config_.seed, kTagInit, 1);
  if (config_.model == ModelKind::tgn_seal) {
    dgcnn_ = std::make_unique<Dgcnn>(config_.dgcnn(sortpool_k_), rng);
  } else {
    mlp_ = std::make_unique<MlpParams>(MlpParams::init(config_.d_mem, rng));
  }
}

std::vector<Tensor> LinkModel::parameters() const {
  std::vector<Tensor> out;
  if (w_proj_.requires_grad()) out.push_back(w_proj_);
  const auto decoder = dgcnn_ ? dgcnn_->parameters() : mlp_->tensors();
  out.insert(out.end(), decoder.begin(), decoder.end());
  return out;
}

Tensor LinkModel::logits(std::span<const Query> queries, const TemporalAdjacency& adj,
                         bool training, std::mt19937_64* dropout_rng) const {
  const EmbeddingKind kind = config_.node_embedding();
  if (dgcnn_) {
    const auto subs = extract_labelled(queries, adj, config_);
    const Tensor x = assemble_batch_features(subs, memory_.state(), kind, w_proj_,
                                             static_cast<int>(config_.l_max));
    return dgcnn_->forward(subs, x, training, dropout_rng);
  }
  std::vector<NodeId> us, vs;
  std::vector<Timestamp> ts;
  for (const Query& q : queries) {
    us.push_back(q.u);
    vs.push_back(q.v);
    ts.push_back(q.t);
  }
  const Tensor zu = embed_nodes(us, ts, memory_.state(), kind, w_proj_);
  const Tensor zv = embed_nodes(vs, ts, memory_.state(), kind, w_proj_);
  return mlp_logits(zu, zv, *mlp_);
}

std::vector<double> LinkModel::score(std::span<const Query> queries,
                                     const TemporalAdjacency& adj) const {
  NoGradGuard guard;
  const Tensor p = sigmoid(logits(queries, adj, false, nullptr));
  return {p.data().begin(), p.data().end()};
}

void LinkModel::save(const std::filesystem::path& path) const {
  std::vector<NamedTensor> out;
  memory_.save(out);
  out.push_back({"embed.w_proj", w_proj_.shape(),
                 std::vector<double>(w_proj_.data().begin(), w_proj_.data().end())});
  if (dgcnn_) {
    out.push_back({"dgcnn.sortpool_k", {1}, {static_cast<double>(sortpool_k_)}});
    dgcnn_->save(out);
  } else {
    mlp_->save(out);
  }
  save_checkpoint(path, out);
}

void LinkModel::load(const std::filesystem::path& path) {
  const auto in = load_checkpoint(path);
  if (dgcnn_) {
    const auto& k = find_tensor(in, "dgcnn.sortpool_k");
    if (k.values.size() != 1 || static_cast<std::size_t>(k.values[0]) != sortpool_k_)
      throw FormatError("checkpoint sortpool size does not match the model");
  }
  memory_.load(in);
  const auto& w = find_tensor(in, "embed.w_proj");
  if (w.shape != w_proj_.shape()) throw FormatError("checkpoint embed.w_proj has the wrong shape");
  std::copy(w.values.begin(), w.values.end(), w_proj_.mutable_data().begin());
  if (dgcnn_) dgcnn_->load(in);
  else mlp_->load(in);
}

// ---- experiment ----------------------------------------------------------

Experiment::Experiment(const EventStream& stream, const TrainConfig& config)
    : stream_(stream), config_(config) {
  config_.validate();
  split_ = chronological_split(stream_, config_.train_frac, config_.val_frac, config_.unseen_frac,
                               config_.seed);
  const auto events = stream_.events();
  for (std::size_t i = 0; i < split_.train_end_idx; ++i)
    if (!split_.is_masked_training_event(events[i])) visible_.push_back(events[i]);
  if (visible_.empty()) throw ConfigError("training split is empty");
  if (region(Region::val).empty()) throw ConfigError("validation split is empty");
  if (region(Region::test).empty()) throw ConfigError("test split is empty");
  train_adj_ = TemporalAdjacency(visible_, stream_.num_nodes());
  full_adj_ = build_adjacency(stream_);
}

std::span<const Event> Experiment::region(Region r) const {
  const auto events = stream_.events();
  if (r == Region::val)
    return events.subspan(split_.train_end_idx, split_.val_end_idx - split_.train_end_idx);
  return events.subspan(split_.val_end_idx);
}

std::size_t Experiment::choose_sortpool_k() const {
  if (config_.sortpool_k != 0) return config_.sortpool_k;
  const std::size_t floor_k = config_.dgcnn(0).min_sortpool_k();
  if (config_.model != ModelKind::tgn_seal) return floor_k;
  std::vector<std::size_t> sizes;
  for_each_batch(visible_, config_.batch_size, [&](std::span<const Event> batch) {
    const auto queries = build_queries(batch, split_, stream_.num_nodes(), config_.seed,
                                       kTagTrainNegatives, config_.neg_per_pos);
    for (const Query& q : queries)
      sizes.push_back(
          extract_enclosing_subgraph(train_adj_, q.u, q.v, q.t, config_.k, config_.cap).size());
  });
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  const auto at = static_cast<std::size_t>(
      std::ceil(config_.sortpool_fraction * static_cast<double>(sizes.size())));
  const std::size_t chosen = sizes[std::clamp<std::size_t>(at, 1, sizes.size()) - 1];
  return std::max(chosen, floor_k);
}

std::vector<double> Experiment::train_epoch(LinkModel& model, Adam& optimizer,
                                            std::size_t epoch) const {
  std::vector<double> losses;
  model.memory().reset();
  auto dropout_rng = derive_rng(config_.seed, kTagDropout, epoch);
  for_each_batch(visible_, config_.batch_size, [&](std::span<const Event> batch) {
    const auto queries = build_queries(batch, split_, stream_.num_nodes(), config_.seed,
                                       kTagTrainNegatives + epoch, config_.neg_per_pos);
    const auto labels = labels_of(queries);
    optimizer.zero_grad();
    const Tensor loss =
        bce_loss(sigmoid(model.logits(queries, train_adj_, true, &dropout_rng)), labels);
    backward(loss);
    optimizer.step();
    losses.push_back(loss.item());
    for (const Event& e : batch) model.memory().stage(e);
    model.memory().flush();
  });
  return losses;
}

void Experiment::replay(LinkModel& model, std::span<const Event> events) const {
  for_each_batch(events, config_.batch_size, [&](std::span<const Event> batch) {
    for (const Event& e : batch) model.memory().stage(e);
    model.memory().flush();
  });
}

EvalResult Experiment::evaluate(LinkModel& model, Region r) const {
  model.memory().reset();
  replay(model, visible_);
  if (r == Region::test) replay(model, region(Region::val));

  const std::uint64_t tag = r == Region::val ? kTagValNegatives : kTagTestNegatives;
  std::vector<double> scores[3], labels[3];  // all, seen, unseen
  EvalResult out;
  for_each_batch(region(r), config_.batch_size, [&](std::span<const Event> batch) {
    const auto queries =
        build_queries(batch, split_, stream_.num_nodes(), config_.seed, tag, config_.neg_per_pos);
    const auto probs = model.score(queries, full_adj_);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const int subset = queries[i].unseen ? 2 : 1;
      for (int s : {0, subset}) {
        scores[s].push_back(probs[i]);
        labels[s].push_back(queries[i].label);
      }
      if (queries[i].label > 0.5) ++(queries[i].unseen ? out.positives_unseen : out.positives_seen);
    }
    for (const Event& e : batch) model.memory().stage(e);
    model.memory().flush();
  });
  auto ap = [&](int s) -> std::optional<double> {
    if (std::none_of(labels[s].begin(), labels[s].end(), [](double y) { return y > 0.5; }))
      return std::nullopt;
    return average_precision(scores[s], labels[s]);
  };
  out.ap_all = ap(0);
  out.ap_seen = ap(1);
  out.ap_unseen = ap(2);
  return out;
}

// ---- runs ----------------------------------------------------------------

RunOutcome train_and_evaluate(const EventStream& stream, const TrainConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const Experiment exp(stream, config);
  RunOutcome outcome;
  outcome.model = std::make_unique<LinkModel>(config, stream.num_nodes(), stream.feat_dim(),
                                              exp.choose_sortpool_k());
  LinkModel& model = *outcome.model;
  Adam optimizer(model.parameters(), AdamOptions{.lr = config.lr});

  RunReport& report = outcome.report;
  report.model = model_name(config.model);
  report.seed = config.seed;
  report.config = to_json(config);
  report.sortpool_k = model.sortpool_k();

  std::vector<std::vector<double>> best;
  double best_ap = -1.0;
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto losses = exp.train_epoch(model, optimizer, epoch);
    report.loss_curve.insert(report.loss_curve.end(), losses.begin(), losses.end());
    const double val_ap = exp.evaluate(model, Region::val).ap_all.value_or(0.0);
    report.val_ap_curve.push_back(val_ap);
    if (val_ap > best_ap) {
      best_ap = val_ap;
      report.best_epoch = epoch;
      stale = 0;
      best.clear();
      for (const Tensor& p : model.parameters()) best.emplace_back(p.data().begin(), p.data().end());
    } else if (++stale >= config.patience) {
      break;
    }
  }
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    std::copy(best[i].begin(), best[i].end(), params[i].mutable_data().begin());

  const EvalResult test = exp.evaluate(model, Region::test);
  report.ap_seen = test.ap_seen;
  report.ap_unseen = test.ap_unseen;
  report.ap_test = test.ap_all;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return outcome;
}

ExperimentSummary run_experiment(const EventStream& stream, const TrainConfig& config,
                                 std::size_t n_runs,
                                 const std::function<void(const RunReport&)>& on_run) {
  if (n_runs == 0) throw ConfigError("n_runs must be at least 1");
  ExperimentSummary summary;
  std::vector<double> seen, unseen, test;
  for (std::size_t r = 0; r < n_runs; ++r) {
    TrainConfig run = config;
    run.seed = config.seed + r;
    RunReport report = train_and_evaluate(stream, run).report;
    if (on_run) on_run(report);
    if (report.ap_seen) seen.push_back(*report.ap_seen);
    if (report.ap_unseen) unseen.push_back(*report.ap_unseen);
    if (report.ap_test) test.push_back(*report.ap_test);
    summary.runs.push_back(std::move(report));
  }
  summary.ap_seen = mean_std(seen);
  summary.ap_unseen = mean_std(unseen);
  summary.ap_test = mean_std(test);
  return summary;
}

}  // namespace tgnseal
