#pragma once

// Subgraph classifier: graph-convolution stack, SortPooling, a two-stage 1-D
// convolution head and a dense readout producing one logit per subgraph.

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tgnseal/checkpoint.hpp"
#include "tgnseal/seal.hpp"
#include "tgnseal/tensor.hpp"

namespace tgnseal {

struct Prediction {
  double y_hat = 0.5;
  double logit = 0.0;
};

struct DgcnnConfig {
  std::size_t in_dim = 0;
  std::vector<std::size_t> channels{32, 32, 32, 1};
  std::size_t sortpool_k = 10;
  std::size_t conv1_filters = 16;
  std::size_t conv2_filters = 32;
  std::size_t conv2_kernel = 5;
  std::size_t pool_width = 2;
  std::size_t dense_hidden = 128;
  double dropout = 0.5;

  std::size_t total_channels() const;
  /// Positions left after pooling and the second convolution.
  std::size_t head_length() const;
  /// Smallest sortpool_k that leaves at least one position for the head.
  std::size_t min_sortpool_k() const { return pool_width * conv2_kernel; }
  /// Throws ConfigError when the shapes do not chain.
  void validate() const;
};

/// Propagation rows for D^-1 (A + I) over a block-diagonal stack of
/// subgraphs: row i lists itself and its neighbours ordered by global node id.
RowPattern propagation_pattern(std::span<const EnclosingSubgraph> subs);

/// tanh(P H W_l) per layer, H_0 = x; returns the layer outputs concatenated
/// along channels.
Tensor graph_conv_stack(const RowPattern& propagation, const Tensor& x,
                        std::span<const Tensor> weights);
Tensor graph_conv_stack(std::shared_ptr<const RowPattern> propagation, const Tensor& x,
                        std::span<const Tensor> weights);

/// Row order chosen by SortPooling for rows [offset, offset + count) of h:
/// descending on the last channel, ties broken by the channel to its left and
/// so on, then by row index. Truncated or padded with -1 to `k_sp` entries.
std::vector<std::ptrdiff_t> sort_pooling_order(const Tensor& h, std::size_t offset,
                                               std::size_t count, std::size_t k_sp);
/// Single-graph SortPooling: [k_sp x C] with zero rows when h has fewer rows.
Tensor sort_pooling(const Tensor& h, std::size_t k_sp);

class Dgcnn {
 public:
  Dgcnn(const DgcnnConfig& config, std::mt19937_64& init_rng);

  const DgcnnConfig& config() const { return config_; }

  /// Logits [subs.size() x 1] for labelled subgraphs whose node features are
  /// stacked in `x` in the same order. `dropout_rng` is required when training.
  Tensor forward(std::span<const EnclosingSubgraph> subs, const Tensor& x, bool training,
                 std::mt19937_64* dropout_rng = nullptr) const;

  std::vector<Tensor> parameters() const;
  std::vector<std::string> parameter_names() const;

  void save(std::vector<NamedTensor>& out) const;
  void load(const std::vector<NamedTensor>& in);

 private:
  DgcnnConfig config_;
  std::vector<Tensor> gc_weights_;
  Tensor conv1_w_, conv1_b_;
  Tensor conv2_w_, conv2_b_;
  Tensor dense1_w_, dense1_b_;
  Tensor dense2_w_, dense2_b_;
};

/// Eval-mode probability for one subgraph.
Prediction predict_link(const EnclosingSubgraph& sub, const Tensor& x, const Dgcnn& model);

}  // namespace tgnseal
