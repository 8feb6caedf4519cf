#pragma once

#include "turnkit/error.hpp"
#include "turnkit/model/tensor.hpp"

namespace turnkit {

// Affine map over rows: y = x W^T + b, with x of shape n x in.
template <typename Scalar>
struct Linear {
  Parameter<Scalar> weight;  // out x in
  Parameter<Scalar> bias;    // out x 1

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out) {
    weight.resize(out, in);
    bias.resize(out, 1);
  }

  void init(std::mt19937_64& rng, double gain = 1.0) {
    fill_normal(weight.value, gain / std::sqrt(static_cast<double>(weight.value.cols())), rng);
    bias.value.setZero();
  }

  Eigen::Index in_dim() const { return weight.value.cols(); }
  Eigen::Index out_dim() const { return weight.value.rows(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) const {
    Matrix<Scalar> y = x * weight.value.transpose();
    y.rowwise() += bias.value.col(0).transpose();
    return y;
  }

  Vector<Scalar> apply(const Vector<Scalar>& x) const {
    if (x.size() != in_dim())
      throw Error("linear: input dimension " + std::to_string(x.size()) + " != " + std::to_string(in_dim()));
    return weight.value * x + bias.value.col(0);
  }

  // Accumulates parameter gradients; returns dL/dx.
  Matrix<Scalar> backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy) {
    weight.grad.noalias() += dy.transpose() * x;
    bias.grad.col(0) += dy.colwise().sum().transpose();
    return dy * weight.value;
  }

  Vector<Scalar> backward_vec(const Vector<Scalar>& x, const Vector<Scalar>& dy) {
    weight.grad.noalias() += dy * x.transpose();
    bias.grad.col(0) += dy;
    return weight.value.transpose() * dy;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

// Bias-free projection with an optional low-rank delta: y = x W^T + (x A^T) B^T.
template <typename Scalar>
struct AdaptedLinear {
  Parameter<Scalar> weight;  // out x in
  Parameter<Scalar> lora_a;  // r x in
  Parameter<Scalar> lora_b;  // out x r
  bool adapted = false;

  AdaptedLinear() = default;
  AdaptedLinear(Eigen::Index in, Eigen::Index out) { weight.resize(out, in); }

  void init(std::mt19937_64& rng) {
    fill_normal(weight.value, 1.0 / std::sqrt(static_cast<double>(weight.value.cols())), rng);
  }

  // B starts at zero so the adapted map equals the base map.
  void add_adapter(int rank, std::mt19937_64& rng) {
    const auto in = weight.value.cols(), out = weight.value.rows();
    if (rank < 1 || rank >= std::min(in, out))
      throw Error("low-rank adapter rank " + std::to_string(rank) + " must be in [1, min(d_in, d_out)) = [1, " +
                  std::to_string(std::min(in, out)) + ")");
    lora_a.resize(rank, in);
    lora_b.resize(out, rank);
    fill_normal(lora_a.value, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    adapted = true;
  }

  struct Cache {
    Matrix<Scalar> xa;  // x A^T
  };

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache& cache) const {
    Matrix<Scalar> y = x * weight.value.transpose();
    if (adapted) {
      cache.xa = x * lora_a.value.transpose();
      y.noalias() += cache.xa * lora_b.value.transpose();
    }
    return y;
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& x, const Cache& cache, const Matrix<Scalar>& dy) {
    weight.grad.noalias() += dy.transpose() * x;
    Matrix<Scalar> dx = dy * weight.value;
    if (adapted) {
      lora_b.grad.noalias() += dy.transpose() * cache.xa;
      const Matrix<Scalar> dxa = dy * lora_b.value;
      lora_a.grad.noalias() += dxa.transpose() * x;
      dx.noalias() += dxa * lora_a.value;
    }
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    if (adapted) {
      f(prefix + ".lora_a", lora_a);
      f(prefix + ".lora_b", lora_b);
    }
  }
};

// Per-row layer normalization with learned gain and offset.
template <typename Scalar>
struct LayerNorm {
  Parameter<Scalar> gain;    // d x 1
  Parameter<Scalar> offset;  // d x 1
  Scalar eps = Scalar(1e-5);

  LayerNorm() = default;
  explicit LayerNorm(Eigen::Index d) {
    gain.resize(d, 1);
    gain.value.setOnes();
    offset.resize(d, 1);
  }

  struct Cache {
    Matrix<Scalar> xhat;
    Vector<Scalar> inv_std;
  };

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache& cache) const {
    const auto d = static_cast<Scalar>(x.cols());
    const Vector<Scalar> mean = x.rowwise().sum() / d;
    Matrix<Scalar> centered = x.colwise() - mean;
    const Vector<Scalar> var = centered.array().square().rowwise().sum() / d;
    cache.inv_std = (var.array() + eps).rsqrt();
    cache.xhat = centered.array().colwise() * cache.inv_std.array();
    Matrix<Scalar> y = cache.xhat.array().rowwise() * gain.value.col(0).transpose().array();
    y.rowwise() += offset.value.col(0).transpose();
    return y;
  }

  Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) {
    gain.grad.col(0) += (dy.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
    offset.grad.col(0) += dy.colwise().sum().transpose();
    const Matrix<Scalar> dxhat = dy.array().rowwise() * gain.value.col(0).transpose().array();
    const auto d = static_cast<Scalar>(dy.cols());
    const Vector<Scalar> mean_dxhat = dxhat.rowwise().sum() / d;
    const Vector<Scalar> mean_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix() / d;
    Matrix<Scalar> dx = dxhat.colwise() - mean_dxhat;
    dx.array() -= cache.xhat.array().colwise() * mean_dxhat_xhat.array();
    dx.array().colwise() *= cache.inv_std.array();
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gain", gain);
    f(prefix + ".offset", offset);
  }
};

}  // namespace turnkit
