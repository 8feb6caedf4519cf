#pragma once

#include <span>
#include <vector>

#include "turnkit/model/attention.hpp"

namespace turnkit {

struct TextEncoderConfig {
  int vocab_size = 0;
  int dim = 32;
  int layers = 1;
  int heads = 2;
  int ff_dim = 64;
  int max_len = 128;
};

// Pre-norm transformer block: x + Attn(LN(x)), then x + MLP(LN(x)).
template <typename Scalar>
struct TransformerBlock {
  LayerNorm<Scalar> ln1, ln2;
  CausalSelfAttention<Scalar> attn;
  Linear<Scalar> fc1, fc2;

  TransformerBlock() = default;
  TransformerBlock(int dim, int heads, int ff_dim)
      : ln1(dim), ln2(dim), attn(dim, heads), fc1(dim, ff_dim), fc2(ff_dim, dim) {}

  void init(std::mt19937_64& rng) {
    attn.init(rng);
    fc1.init(rng);
    fc2.init(rng);
  }

  struct Cache {
    typename LayerNorm<Scalar>::Cache ln1c, ln2c;
    typename CausalSelfAttention<Scalar>::Cache attnc;
    Matrix<Scalar> a, c, z1, h1;
  };

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache& k) const {
    k.a = ln1.forward(x, k.ln1c);
    Matrix<Scalar> x1 = x + attn.forward(k.a, k.attnc);
    k.c = ln2.forward(x1, k.ln2c);
    k.z1 = fc1.forward(k.c);
    k.h1 = k.z1.unaryExpr([](Scalar t) { return gelu(t); });
    return x1 + fc2.forward(k.h1);
  }

  Matrix<Scalar> backward(const Cache& k, const Matrix<Scalar>& dout) {
    const Matrix<Scalar> dh1 = fc2.backward(k.h1, dout);
    const Matrix<Scalar> dz1 = dh1.cwiseProduct(k.z1.unaryExpr([](Scalar t) { return gelu_grad(t); }));
    const Matrix<Scalar> dx1 = dout + ln2.backward(k.ln2c, fc1.backward(k.c, dz1));
    return dx1 + ln1.backward(k.ln1c, attn.backward(k.a, k.attnc, dx1));
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    ln1.visit(prefix + ".ln1", f);
    attn.visit(prefix + ".attn", f);
    ln2.visit(prefix + ".ln2", f);
    fc1.visit(prefix + ".fc1", f);
    fc2.visit(prefix + ".fc2", f);
  }
};

// Small causal transformer with learned positions. The sequence embedding is
// the final-layer state at the last position.
template <typename Scalar>
struct TextEncoder {
  TextEncoderConfig config;
  Parameter<Scalar> token_embedding;     // vocab x dim
  Parameter<Scalar> position_embedding;  // max_len x dim
  std::vector<TransformerBlock<Scalar>> blocks;
  LayerNorm<Scalar> final_norm;

  TextEncoder() = default;
  explicit TextEncoder(const TextEncoderConfig& cfg) : config(cfg), final_norm(cfg.dim) {
    if (cfg.vocab_size < 1 || cfg.dim < 1 || cfg.layers < 0 || cfg.ff_dim < 1 || cfg.max_len < 1)
      throw Error("text encoder: invalid configuration");
    token_embedding.resize(cfg.vocab_size, cfg.dim);
    position_embedding.resize(cfg.max_len, cfg.dim);
    for (int l = 0; l < cfg.layers; ++l) blocks.emplace_back(cfg.dim, cfg.heads, cfg.ff_dim);
  }

  void init(std::mt19937_64& rng) {
    fill_normal(token_embedding.value, 0.1, rng);
    fill_normal(position_embedding.value, 0.1, rng);
    for (auto& b : blocks) b.init(rng);
  }

  void add_adapters(int rank, std::mt19937_64& rng) {
    for (auto& b : blocks) b.attn.add_adapters(rank, rng);
  }

  struct Cache {
    std::vector<int> ids;  // after truncation
    std::vector<typename TransformerBlock<Scalar>::Cache> blocks;
    typename LayerNorm<Scalar>::Cache final_norm;
    Matrix<Scalar> hidden;  // final states, L x dim
  };

  // Sequences longer than max_len keep their last max_len tokens.
  Vector<Scalar> forward(std::span<const int> ids, Cache& c) const {
    if (ids.empty()) throw Error("text encoder: empty token sequence");
    const std::size_t keep = std::min<std::size_t>(ids.size(), config.max_len);
    c.ids.assign(ids.end() - keep, ids.end());
    const auto len = static_cast<Eigen::Index>(keep);
    Matrix<Scalar> x(len, config.dim);
    for (Eigen::Index i = 0; i < len; ++i) {
      const int id = c.ids[i];
      if (id < 0 || id >= config.vocab_size) throw Error("text encoder: unknown token id " + std::to_string(id));
      x.row(i) = token_embedding.value.row(id) + position_embedding.value.row(i);
    }
    c.blocks.resize(blocks.size());
    for (std::size_t l = 0; l < blocks.size(); ++l) x = blocks[l].forward(x, c.blocks[l]);
    c.hidden = final_norm.forward(x, c.final_norm);
    return c.hidden.row(len - 1).transpose();
  }

  // Full final hidden states (all positions).
  Matrix<Scalar> hidden_states(std::span<const int> ids) const {
    Cache c;
    forward(ids, c);
    return c.hidden;
  }

  void backward(const Cache& c, const Vector<Scalar>& d_last) {
    const auto len = static_cast<Eigen::Index>(c.ids.size());
    Matrix<Scalar> dx = Matrix<Scalar>::Zero(len, config.dim);
    dx.row(len - 1) = d_last.transpose();
    dx = final_norm.backward(c.final_norm, dx);
    for (std::size_t l = blocks.size(); l-- > 0;) dx = blocks[l].backward(c.blocks[l], dx);
    for (Eigen::Index i = 0; i < len; ++i) {
      token_embedding.grad.row(c.ids[i]) += dx.row(i);
      position_embedding.grad.row(i) += dx.row(i);
    }
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".token_embedding", token_embedding);
    f(prefix + ".position_embedding", position_embedding);
    for (std::size_t l = 0; l < blocks.size(); ++l) blocks[l].visit(prefix + ".layers." + std::to_string(l), f);
    final_norm.visit(prefix + ".final_norm", f);
  }
};

}  // namespace turnkit
