#include "tgnseal/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tgnseal/errors.hpp"

namespace tgnseal {

using nlohmann::json;

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::tgn_seal: return "tgn_seal";
    case ModelKind::tgn_id: return "tgn_id";
    case ModelKind::tgn_time: return "tgn_time";
  }
  return "?";
}

ModelKind parse_model(const std::string& name) {
  if (name == "tgn_seal") return ModelKind::tgn_seal;
  if (name == "tgn_id") return ModelKind::tgn_id;
  if (name == "tgn_time") return ModelKind::tgn_time;
  throw ConfigError("model must be tgn_seal, tgn_id or tgn_time, got '" + name + "'");
}

namespace {

std::string embedding_name(EmbeddingKind kind) {
  return kind == EmbeddingKind::identity ? "identity" : "time_projection";
}

EmbeddingKind parse_embedding(const std::string& name) {
  if (name == "identity") return EmbeddingKind::identity;
  if (name == "time_projection") return EmbeddingKind::time_projection;
  throw ConfigError("embedding must be identity or time_projection, got '" + name + "'");
}

std::string aggregation_name(Aggregation a) {
  return a == Aggregation::most_recent ? "most_recent" : "mean";
}

Aggregation parse_aggregation(const std::string& name) {
  if (name == "most_recent") return Aggregation::most_recent;
  if (name == "mean") return Aggregation::mean;
  throw ConfigError("aggregation must be most_recent or mean, got '" + name + "'");
}

std::size_t as_size(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::size_t>(v.get<long long>());
  throw ConfigError("config key '" + key + "' must be a non-negative integer");
}

double as_double(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"model", "tgn_seal | tgn_id | tgn_time"},
      {"embedding", "node embedding inside subgraph features: identity | time_projection"},
      {"aggregation", "per-batch message aggregation: most_recent | mean"},
      {"k", "enclosing subgraph hops (1-3)"},
      {"cap", "most recent neighbours expanded per node per hop"},
      {"l_max", "largest node label; one-hot width is l_max + 1"},
      {"d_mem", "memory / embedding width"},
      {"d_time", "time encoding width"},
      {"batch_size", "events per temporal batch"},
      {"lr", "Adam learning rate"},
      {"epochs", "maximum training epochs"},
      {"patience", "epochs without validation improvement before stopping"},
      {"seed", "seed for every random draw"},
      {"train_frac", "leading fraction of events used for training"},
      {"val_frac", "fraction of events used for validation"},
      {"unseen_frac", "fraction of nodes held out of training"},
      {"neg_per_pos", "negatives sampled per positive event"},
      {"gc_channels", "graph-conv layer widths"},
      {"sortpool_k", "rows kept by SortPooling; 0 = pick from training subgraph sizes"},
      {"sortpool_fraction", "share of training subgraphs with at least sortpool_k nodes when picked"},
      {"conv1_filters", "filters of the first 1-D convolution"},
      {"conv2_filters", "filters of the second 1-D convolution"},
      {"conv2_kernel", "kernel of the second 1-D convolution"},
      {"pool_width", "max-pool width between the convolutions"},
      {"dense_hidden", "hidden units of the dense readout"},
      {"dropout", "dropout rate before the output layer"},
      {"threads", "worker threads for subgraph extraction"},
  };
  return keys;
}

EmbeddingKind TrainConfig::node_embedding() const {
  switch (model) {
    case ModelKind::tgn_seal: return embedding;
    case ModelKind::tgn_id: return EmbeddingKind::identity;
    case ModelKind::tgn_time: return EmbeddingKind::time_projection;
  }
  return embedding;
}

DgcnnConfig TrainConfig::dgcnn(std::size_t sortpool_size) const {
  DgcnnConfig c;
  c.in_dim = d_mem + l_max + 1;
  c.channels = gc_channels;
  c.sortpool_k = sortpool_size;
  c.conv1_filters = conv1_filters;
  c.conv2_filters = conv2_filters;
  c.conv2_kernel = conv2_kernel;
  c.pool_width = pool_width;
  c.dense_hidden = dense_hidden;
  c.dropout = dropout;
  return c;
}

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("config key '") + name + "' must be positive");
  };
  if (k < 1 || k > 3) throw ConfigError("config key 'k' must be 1, 2 or 3");
  positive(cap, "cap");
  positive(l_max, "l_max");
  positive(d_mem, "d_mem");
  positive(d_time, "d_time");
  positive(batch_size, "batch_size");
  positive(epochs, "epochs");
  positive(patience, "patience");
  positive(neg_per_pos, "neg_per_pos");
  positive(threads, "threads");
  if (!(lr > 0.0)) throw ConfigError("config key 'lr' must be positive");
  if (!(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0))
    throw ConfigError("train_frac and val_frac must be positive with train_frac + val_frac < 1");
  if (!(unseen_frac >= 0.0 && unseen_frac < 1.0))
    throw ConfigError("config key 'unseen_frac' must be in [0, 1)");
  if (!(sortpool_fraction > 0.0 && sortpool_fraction <= 1.0))
    throw ConfigError("config key 'sortpool_fraction' must be in (0, 1]");
  DgcnnConfig probe = dgcnn(0);
  probe.sortpool_k = std::max(sortpool_k, probe.min_sortpool_k());
  probe.validate();
  if (sortpool_k != 0 && sortpool_k < probe.min_sortpool_k())
    throw ConfigError("config key 'sortpool_k' must be 0 or at least " +
                      std::to_string(probe.min_sortpool_k()));
}

json to_json(const TrainConfig& c) {
  return json{{"model", model_name(c.model)},
              {"embedding", embedding_name(c.embedding)},
              {"aggregation", aggregation_name(c.aggregation)},
              {"k", c.k},
              {"cap", c.cap},
              {"l_max", c.l_max},
              {"d_mem", c.d_mem},
              {"d_time", c.d_time},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"epochs", c.epochs},
              {"patience", c.patience},
              {"seed", c.seed},
              {"train_frac", c.train_frac},
              {"val_frac", c.val_frac},
              {"unseen_frac", c.unseen_frac},
              {"neg_per_pos", c.neg_per_pos},
              {"gc_channels", c.gc_channels},
              {"sortpool_k", c.sortpool_k},
              {"sortpool_fraction", c.sortpool_fraction},
              {"conv1_filters", c.conv1_filters},
              {"conv2_filters", c.conv2_filters},
              {"conv2_kernel", c.conv2_kernel},
              {"pool_width", c.pool_width},
              {"dense_hidden", c.dense_hidden},
              {"dropout", c.dropout},
              {"threads", c.threads}};
}

TrainConfig config_from_json(const json& doc, TrainConfig c) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const auto& keys = config_keys();
  for (const auto& [key, v] : doc.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; }))
      throw ConfigError("unknown config key '" + key + "'");
    if (key == "model") c.model = parse_model(as_string(v, key));
    else if (key == "embedding") c.embedding = parse_embedding(as_string(v, key));
    else if (key == "aggregation") c.aggregation = parse_aggregation(as_string(v, key));
    else if (key == "k") c.k = as_size(v, key);
    else if (key == "cap") c.cap = as_size(v, key);
    else if (key == "l_max") c.l_max = as_size(v, key);
    else if (key == "d_mem") c.d_mem = as_size(v, key);
    else if (key == "d_time") c.d_time = as_size(v, key);
    else if (key == "batch_size") c.batch_size = as_size(v, key);
    else if (key == "lr") c.lr = as_double(v, key);
    else if (key == "epochs") c.epochs = as_size(v, key);
    else if (key == "patience") c.patience = as_size(v, key);
    else if (key == "seed") c.seed = as_size(v, key);
    else if (key == "train_frac") c.train_frac = as_double(v, key);
    else if (key == "val_frac") c.val_frac = as_double(v, key);
    else if (key == "unseen_frac") c.unseen_frac = as_double(v, key);
    else if (key == "neg_per_pos") c.neg_per_pos = as_size(v, key);
    else if (key == "gc_channels") {
      if (!v.is_array() || v.empty()) throw ConfigError("config key 'gc_channels' must be a non-empty array");
      c.gc_channels.clear();
      for (const auto& x : v) c.gc_channels.push_back(as_size(x, key));
    }
    else if (key == "sortpool_k") c.sortpool_k = as_size(v, key);
    else if (key == "sortpool_fraction") c.sortpool_fraction = as_double(v, key);
    else if (key == "conv1_filters") c.conv1_filters = as_size(v, key);
    else if (key == "conv2_filters") c.conv2_filters = as_size(v, key);
    else if (key == "conv2_kernel") c.conv2_kernel = as_size(v, key);
    else if (key == "pool_width") c.pool_width = as_size(v, key);
    else if (key == "dense_hidden") c.dense_hidden = as_size(v, key);
    else if (key == "dropout") c.dropout = as_double(v, key);
    else if (key == "threads") c.threads = as_size(v, key);
  }
  c.validate();
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void apply_override(TrainConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  config = config_from_json(json{{key, value}}, config);
}

std::string describe_config_keys() {
  const json defaults = to_json(TrainConfig{});
  std::ostringstream os;
  for (const ConfigKey& k : config_keys()) {
    std::string shown = defaults.at(k.name).dump();
    os << "  " << k.name << std::string(k.name.size() < 18 ? 18 - k.name.size() : 1, ' ') << shown
       << std::string(shown.size() < 16 ? 16 - shown.size() : 1, ' ') << k.help << '\n';
  }
  return os.str();
}

}  // namespace tgnseal
