#pragma once

// Temporal-batch training loop, evaluation over the validation and test
// regions, and multi-run experiments.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgnseal/config.hpp"
#include "tgnseal/dgcnn.hpp"
#include "tgnseal/events.hpp"
#include "tgnseal/memory.hpp"
#include "tgnseal/metrics.hpp"
#include "tgnseal/mlp.hpp"
#include "tgnseal/optim.hpp"
#include "tgnseal/seal.hpp"

namespace tgnseal {

/// One scored candidate pair (u, v) at time t.
struct Query {
  NodeId u = 0;
  NodeId v = 0;
  Timestamp t = 0.0;
  double label = 0.0;
  std::size_t event_idx = 0;  // the positive event the query was built from
  bool unseen = false;        // subset of that positive event
};

/// Random-stream tags for derive_rng.
inline constexpr std::uint64_t kTagInit = 1;
inline constexpr std::uint64_t kTagDropout = 2;
inline constexpr std::uint64_t kTagValNegatives = 3;
inline constexpr std::uint64_t kTagTestNegatives = 4;
/// Training negatives of epoch e use tag kTagTrainNegatives + e.
inline constexpr std::uint64_t kTagTrainNegatives = 1000;

/// The positive plus neg_per_pos negatives (u, v') per event, v' uniform over
/// nodes other than u and v, drawn from derive_rng(seed, tag, event.idx).
std::vector<Query> build_queries(std::span<const Event> batch, const SplitSpec& split,
                                 std::size_t num_nodes, std::uint64_t seed, std::uint64_t tag,
                                 std::size_t neg_per_pos);

/// Labelled enclosing subgraphs for every query, fanned out over `threads`.
std::vector<EnclosingSubgraph> extract_labelled(std::span<const Query> queries,
                                                const TemporalAdjacency& adj,
                                                const TrainConfig& config);

/// Memory plus decoder for one configured model.
class LinkModel {
 public:
  LinkModel(const TrainConfig& config, std::size_t num_nodes, std::size_t feat_dim,
            std::size_t sortpool_k);

  const TrainConfig& config() const { return config_; }
  TemporalMemory& memory() { return memory_; }
  const TemporalMemory& memory() const { return memory_; }
  std::size_t sortpool_k() const { return sortpool_k_; }
  const Tensor& time_projection() const { return w_proj_; }
  const Dgcnn* dgcnn() const { return dgcnn_.get(); }
  const MlpParams* mlp() const { return mlp_.get(); }

  /// Parameters updated by the optimiser.
  std::vector<Tensor> parameters() const;

  /// Logits [queries x 1] against the current memory.
  Tensor logits(std::span<const Query> queries, const TemporalAdjacency& adj, bool training,
                std::mt19937_64* dropout_rng) const;
  /// Eval-mode probabilities.
  std::vector<double> score(std::span<const Query> queries, const TemporalAdjacency& adj) const;

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  TrainConfig config_;
  std::size_t sortpool_k_;
  std::mt19937_64 memory_rng_;
  TemporalMemory memory_;
  Tensor w_proj_;
  std::unique_ptr<Dgcnn> dgcnn_;
  std::unique_ptr<MlpParams> mlp_;
};

enum class Region { val, test };

struct EvalResult {
  std::optional<double> ap_all;
  std::optional<double> ap_seen;
  std::optional<double> ap_unseen;
  std::size_t positives_seen = 0;
  std::size_t positives_unseen = 0;
};

/// Fixed split, adjacency indices and event partitions for one stream.
class Experiment {
 public:
  Experiment(const EventStream& stream, const TrainConfig& config);

  const EventStream& stream() const { return stream_; }
  const TrainConfig& config() const { return config_; }
  const SplitSpec& split() const { return split_; }
  /// Training events not touching held-out nodes.
  std::span<const Event> visible_training() const { return visible_; }
  std::span<const Event> region(Region r) const;
  const TemporalAdjacency& training_adjacency() const { return train_adj_; }
  const TemporalAdjacency& full_adjacency() const { return full_adj_; }

  /// SortPooling size from the first epoch's training subgraphs (or the
  /// configured value if set).
  std::size_t choose_sortpool_k() const;

  /// One pass over the visible training events from a reset memory. Returns
  /// the mean loss of every batch.
  std::vector<double> train_epoch(LinkModel& model, Adam& optimizer, std::size_t epoch) const;

  /// Memory reset, replay of everything before the region, then scoring of
  /// each region batch before its events enter memory.
  EvalResult evaluate(LinkModel& model, Region region) const;

 private:
  void replay(LinkModel& model, std::span<const Event> events) const;

  const EventStream& stream_;
  TrainConfig config_;
  SplitSpec split_;
  std::vector<Event> visible_;
  TemporalAdjacency train_adj_;
  TemporalAdjacency full_adj_;
};

struct RunReport {
  std::string model;
  std::uint64_t seed = 0;
  std::optional<double> ap_seen;
  std::optional<double> ap_unseen;
  std::optional<double> ap_test;
  std::vector<double> loss_curve;
  std::vector<double> val_ap_curve;
  double wall_time_s = 0.0;
  nlohmann::json config;
  std::size_t best_epoch = 0;
  std::size_t sortpool_k = 0;
};

struct RunOutcome {
  RunReport report;
  std::unique_ptr<LinkModel> model;  // best-validation parameters restored
};

/// Full train (with early stopping) + test evaluation for config.seed.
RunOutcome train_and_evaluate(const EventStream& stream, const TrainConfig& config);

struct ExperimentSummary {
  std::vector<RunReport> runs;
  MeanStd ap_seen, ap_unseen, ap_test;
};

/// n_runs independent runs with seeds seed, seed + 1, ... Each report is
/// handed to `on_run` as soon as it exists (used to persist partial results).
ExperimentSummary run_experiment(const EventStream& stream, const TrainConfig& config,
                                 std::size_t n_runs,
                                 const std::function<void(const RunReport&)>& on_run = {});

}  // namespace tgnseal
