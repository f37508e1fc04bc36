#include "tgnseal/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "tgnseal/errors.hpp"

namespace tgnseal {

MlpParams MlpParams::init(std::size_t d, std::mt19937_64& rng) {
  const double b_in = 1.0 / std::sqrt(static_cast<double>(2 * d));
  const double b_hid = 1.0 / std::sqrt(static_cast<double>(d));
  MlpParams p;
  p.w1 = Tensor::uniform({2 * d, d}, b_in, rng, true);
  p.b1 = Tensor::uniform({d}, b_in, rng, true);
  p.w2 = Tensor::uniform({d, d}, b_hid, rng, true);
  p.b2 = Tensor::uniform({d}, b_hid, rng, true);
  p.w3 = Tensor::uniform({d, 1}, b_hid, rng, true);
  p.b3 = Tensor::uniform({1}, b_hid, rng, true);
  return p;
}

MlpParams MlpParams::zeros(std::size_t d) {
  return {Tensor::zeros({2 * d, d}, true), Tensor::zeros({d}, true),
          Tensor::zeros({d, d}, true),     Tensor::zeros({d}, true),
          Tensor::zeros({d, 1}, true),     Tensor::zeros({1}, true)};
}

std::vector<Tensor> MlpParams::tensors() const { return {w1, b1, w2, b2, w3, b3}; }

std::vector<std::string> MlpParams::names() {
  return {"mlp.w1", "mlp.b1", "mlp.w2", "mlp.b2", "mlp.w3", "mlp.b3"};
}

void MlpParams::save(std::vector<NamedTensor>& out) const {
  const auto ts = tensors();
  const auto ns = names();
  for (std::size_t i = 0; i < ts.size(); ++i)
    out.push_back({ns[i], ts[i].shape(), std::vector<double>(ts[i].data().begin(), ts[i].data().end())});
}

void MlpParams::load(const std::vector<NamedTensor>& in) {
  auto ts = tensors();
  const auto ns = names();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const NamedTensor& t = find_tensor(in, ns[i]);
    if (t.shape != ts[i].shape())
      throw FormatError("checkpoint tensor " + ns[i] + " has shape " + shape_to_string(t.shape));
    std::copy(t.values.begin(), t.values.end(), ts[i].mutable_data().begin());
  }
}

Tensor mlp_logits(const Tensor& z_u, const Tensor& z_v, const MlpParams& p) {
  if (z_u.shape() != z_v.shape())
    throw ShapeError("mlp: embedding shapes " + shape_to_string(z_u.shape()) + " and " +
                     shape_to_string(z_v.shape()) + " differ");
  Tensor h = relu(add(matmul(concat({z_u, z_v}, 1), p.w1), p.b1));
  h = relu(add(matmul(h, p.w2), p.b2));
  return add(matmul(h, p.w3), p.b3);
}

Prediction baseline_mlp_decode(std::span<const double> z_u, std::span<const double> z_v,
                               const MlpParams& p) {
  NoGradGuard guard;
  const Tensor u({1, z_u.size()}, std::vector<double>(z_u.begin(), z_u.end()));
  const Tensor v({1, z_v.size()}, std::vector<double>(z_v.begin(), z_v.end()));
  const Tensor logit = mlp_logits(u, v, p);
  return {sigmoid(logit).item(), logit.item()};
}

}  // namespace tgnseal
