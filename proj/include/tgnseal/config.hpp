#pragma once

// Flat JSON experiment configuration with a closed key schema.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgnseal/dgcnn.hpp"
#include "tgnseal/memory.hpp"

namespace tgnseal {

enum class ModelKind { tgn_seal, tgn_id, tgn_time };

std::string model_name(ModelKind kind);
ModelKind parse_model(const std::string& name);

struct TrainConfig {
  ModelKind model = ModelKind::tgn_seal;
  EmbeddingKind embedding = EmbeddingKind::identity;  // SEAL feature embedding
  Aggregation aggregation = Aggregation::most_recent;
  std::size_t k = 2;
  std::size_t cap = 20;
  std::size_t l_max = 10;
  std::size_t d_mem = 32;
  std::size_t d_time = 16;
  std::size_t batch_size = 100;
  double lr = 1e-4;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  double train_frac = 0.70;
  double val_frac = 0.15;
  double unseen_frac = 0.10;
  std::size_t neg_per_pos = 1;
  std::vector<std::size_t> gc_channels{32, 32, 32, 1};
  std::size_t sortpool_k = 0;  // 0 = choose from the first epoch's subgraphs
  double sortpool_fraction = 0.6;
  std::size_t conv1_filters = 16;
  std::size_t conv2_filters = 32;
  std::size_t conv2_kernel = 5;
  std::size_t pool_width = 2;
  std::size_t dense_hidden = 128;
  double dropout = 0.5;
  std::size_t threads = 1;

  /// Embedding used for node representations under the configured model.
  EmbeddingKind node_embedding() const;
  /// Decoder architecture for feature width in_dim and the given sortpool size.
  DgcnnConfig dgcnn(std::size_t sortpool_size) const;
  /// Throws ConfigError on any out-of-range value.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// Every accepted key in declaration order, with a one-line description.
const std::vector<ConfigKey>& config_keys();

nlohmann::json to_json(const TrainConfig& config);
/// Unknown keys and wrong types throw ConfigError. Missing keys keep defaults.
TrainConfig config_from_json(const nlohmann::json& doc, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path);
/// Applies "key=value"; the value is parsed as JSON when possible, else as a string.
void apply_override(TrainConfig& config, const std::string& assignment);

/// Key table with default values, for --help.
std::string describe_config_keys();

}  // namespace tgnseal
