#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <vector>

#include "turnkit/error.hpp"
#include "turnkit/model/tensor.hpp"

namespace turnkit {

inline constexpr double kBceEpsilon = 1e-7;

// Binary cross-entropy on a probability clamped to [eps, 1 - eps].
template <typename Scalar>
Scalar binary_cross_entropy(Scalar p, Scalar y) {
  const Scalar eps = static_cast<Scalar>(kBceEpsilon);
  const Scalar q = std::clamp(p, eps, Scalar(1) - eps);
  return -(y * std::log(q) + (Scalar(1) - y) * std::log(Scalar(1) - q));
}

// d BCE(sigmoid(z), y) / dz; zero where the clamp is active.
template <typename Scalar>
Scalar binary_cross_entropy_logit_grad(Scalar p, Scalar y) {
  const Scalar eps = static_cast<Scalar>(kBceEpsilon);
  if (p < eps || p > Scalar(1) - eps) return Scalar(0);
  return p - y;
}

template <typename Scalar>
Scalar mean_binary_cross_entropy(std::span<const Scalar> probs, std::span<const Scalar> targets) {
  if (probs.size() != targets.size()) throw Error("bce: predictions and targets differ in length");
  if (probs.empty()) return Scalar(0);
  Scalar sum = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) sum += binary_cross_entropy(probs[i], targets[i]);
  return sum / static_cast<Scalar>(probs.size());
}

// Sum over tasks of the per-task mean BCE.
template <typename Scalar>
Scalar multitask_loss(const std::array<std::vector<Scalar>, 3>& probs, const std::array<std::vector<Scalar>, 3>& targets) {
  Scalar total = 0;
  for (int s = 0; s < 3; ++s)
    total += mean_binary_cross_entropy<Scalar>(std::span<const Scalar>(probs[s]), std::span<const Scalar>(targets[s]));
  return total;
}

// Negative log softmax posterior of the true class.
template <typename Scalar>
Scalar cross_entropy(const Vector<Scalar>& logits, int label) {
  const Scalar m = logits.maxCoeff();
  const Scalar lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(label);
}

}  // namespace turnkit
