#pragma once

#include <limits>
#include <vector>

#include "turnkit/model/layers.hpp"

namespace turnkit {

// Multi-head causal self-attention over an L x d sequence. The four
// projections are bias-free and can carry low-rank adapters.
template <typename Scalar>
struct CausalSelfAttention {
  int heads = 1;
  AdaptedLinear<Scalar> q, k, v, o;

  CausalSelfAttention() = default;
  CausalSelfAttention(Eigen::Index dim, int n_heads) : heads(n_heads), q(dim, dim), k(dim, dim), v(dim, dim), o(dim, dim) {
    if (n_heads < 1 || dim % n_heads != 0)
      throw Error("attention: dimension " + std::to_string(dim) + " not divisible by " + std::to_string(n_heads) +
                  " heads");
  }

  void init(std::mt19937_64& rng) {
    q.init(rng);
    k.init(rng);
    v.init(rng);
    o.init(rng);
  }

  void add_adapters(int rank, std::mt19937_64& rng) {
    q.add_adapter(rank, rng);
    k.add_adapter(rank, rng);
    v.add_adapter(rank, rng);
    o.add_adapter(rank, rng);
  }

  struct Cache {
    typename AdaptedLinear<Scalar>::Cache qc, kc, vc, oc;
    Matrix<Scalar> Q, K, V, O;
    std::vector<Matrix<Scalar>> P;  // attention weights per head, lower triangular
  };

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache& c) const {
    const Eigen::Index len = x.rows(), dim = x.cols(), dh = dim / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    c.Q = q.forward(x, c.qc);
    c.K = k.forward(x, c.kc);
    c.V = v.forward(x, c.vc);
    c.O.setZero(len, dim);
    c.P.assign(heads, Matrix<Scalar>());
    for (int h = 0; h < heads; ++h) {
      const auto Qh = c.Q.middleCols(h * dh, dh);
      const auto Kh = c.K.middleCols(h * dh, dh);
      Matrix<Scalar> S = (Qh * Kh.transpose()) * scale;
      Matrix<Scalar>& P = c.P[h];
      P.setZero(len, len);
      for (Eigen::Index i = 0; i < len; ++i) {
        auto row = S.row(i).head(i + 1);
        const Scalar m = row.maxCoeff();
        auto e = (row.array() - m).exp();
        P.row(i).head(i + 1) = e / e.sum();
      }
      c.O.middleCols(h * dh, dh).noalias() = P * c.V.middleCols(h * dh, dh);
    }
    return o.forward(c.O, c.oc);
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& x, const Cache& c, const Matrix<Scalar>& dy) {
    const Eigen::Index len = x.rows(), dim = x.cols(), dh = dim / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    const Matrix<Scalar> dO = o.backward(c.O, c.oc, dy);
    Matrix<Scalar> dQ(len, dim), dK(len, dim), dV(len, dim);
    for (int h = 0; h < heads; ++h) {
      const auto dOh = dO.middleCols(h * dh, dh);
      const Matrix<Scalar>& P = c.P[h];
      const Matrix<Scalar> dP = dOh * c.V.middleCols(h * dh, dh).transpose();
      dV.middleCols(h * dh, dh).noalias() = P.transpose() * dOh;
      const Vector<Scalar> inner = (dP.array() * P.array()).rowwise().sum();
      const Matrix<Scalar> dS = (P.array() * (dP.colwise() - inner).array()).matrix() * scale;
      dQ.middleCols(h * dh, dh).noalias() = dS * c.K.middleCols(h * dh, dh);
      dK.middleCols(h * dh, dh).noalias() = dS.transpose() * c.Q.middleCols(h * dh, dh);
    }
    Matrix<Scalar> dx = q.backward(x, c.qc, dQ);
    dx += k.backward(x, c.kc, dK);
    dx += v.backward(x, c.vc, dV);
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    q.visit(prefix + ".q", f);
    k.visit(prefix + ".k", f);
    v.visit(prefix + ".v", f);
    o.visit(prefix + ".o", f);
  }
};

}  // namespace turnkit
