#pragma once

#include "turnkit/model/layers.hpp"

namespace turnkit {

// Mean over the T frame rows followed by an affine projection.
template <typename Scalar>
Vector<Scalar> encode_acoustic(const Matrix<Scalar>& frames, const Linear<Scalar>& projection) {
  if (frames.rows() == 0) throw Error("encode_acoustic: empty acoustic segment");
  return projection.apply(frames.colwise().mean().transpose());
}

// Frame backbone (frozen stand-in for a pretrained speech encoder: per-frame
// affine + tanh, or identity when backbone_dim == 0), mean pooling, and a
// trainable projection.
template <typename Scalar>
struct AcousticBranch {
  int frame_dim = 0;
  int backbone_dim = 0;
  Linear<Scalar> backbone;
  Linear<Scalar> projection;

  AcousticBranch() = default;
  AcousticBranch(int frame_dim_, int backbone_dim_, int proj_dim)
      : frame_dim(frame_dim_), backbone_dim(backbone_dim_) {
    if (frame_dim_ < 1 || backbone_dim_ < 0 || proj_dim < 1) throw Error("acoustic branch: invalid dimensions");
    if (backbone_dim > 0) backbone = Linear<Scalar>(frame_dim, backbone_dim);
    projection = Linear<Scalar>(backbone_dim > 0 ? backbone_dim : frame_dim, proj_dim);
  }

  void init(std::mt19937_64& rng) {
    if (backbone_dim > 0) {
      backbone.init(rng);
      fill_normal(backbone.bias.value, 0.1, rng);
    }
    projection.init(rng);
  }

  Matrix<Scalar> frame_embeddings(const Matrix<Scalar>& frames) const {
    if (frames.cols() != frame_dim)
      throw Error("acoustic branch: frame dimension " + std::to_string(frames.cols()) + " != " +
                  std::to_string(frame_dim));
    if (backbone_dim == 0) return frames;
    return backbone.forward(frames).array().tanh().matrix();
  }

  struct Cache {
    Vector<Scalar> pooled;
  };

  Vector<Scalar> forward(const Matrix<Scalar>& frames, Cache& c) const {
    if (frames.rows() == 0) throw Error("encode_acoustic: empty acoustic segment");
    c.pooled = frame_embeddings(frames).colwise().mean().transpose();
    return projection.apply(c.pooled);
  }

  // The backbone never trains, so gradients stop at the pooled embedding.
  void backward(const Cache& c, const Vector<Scalar>& d_out) { projection.backward_vec(c.pooled, d_out); }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    if (backbone_dim > 0) backbone.visit(prefix + ".backbone", f);
    projection.visit(prefix + ".projection", f);
  }
};

}  // namespace turnkit
