#pragma once

// Pairwise MLP decoder used by the embedding-only baselines:
// sigmoid(MLP(z_u || z_v)) with two relu hidden layers of width d.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "tgnseal/checkpoint.hpp"
#include "tgnseal/dgcnn.hpp"
#include "tgnseal/tensor.hpp"

namespace tgnseal {

struct MlpParams {
  Tensor w1, b1;  // [2d x d], [d]
  Tensor w2, b2;  // [d x d], [d]
  Tensor w3, b3;  // [d x 1], [1]

  static MlpParams init(std::size_t d, std::mt19937_64& rng);
  static MlpParams zeros(std::size_t d);
  std::vector<Tensor> tensors() const;
  static std::vector<std::string> names();

  void save(std::vector<NamedTensor>& out) const;
  void load(const std::vector<NamedTensor>& in);
};

/// Logits [B x 1] for row-paired embeddings z_u, z_v [B x d].
Tensor mlp_logits(const Tensor& z_u, const Tensor& z_v, const MlpParams& p);

/// Single-pair probability, no tape.
Prediction baseline_mlp_decode(std::span<const double> z_u, std::span<const double> z_v,
                               const MlpParams& p);

}  // namespace tgnseal
