#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "turnkit/model/acoustic.hpp"
#include "turnkit/model/loss.hpp"
#include "turnkit/model/text_encoder.hpp"

namespace turnkit {

enum class FusionOption { AcousticOnly, TextOnly, FusionOpt1, FusionOpt2 };
enum class HeadKind { ThreeWay, MultiTaskBinary };

const char* fusion_name(FusionOption f);
FusionOption fusion_from_name(const std::string& s);
const char* head_name(HeadKind h);
HeadKind head_from_name(const std::string& s);

inline bool uses_acoustic(FusionOption f) { return f != FusionOption::TextOnly; }
inline bool uses_text(FusionOption f) { return f != FusionOption::AcousticOnly; }

struct ModelConfig {
  int frame_dim = 8;
  int backbone_dim = 32;
  int proj_dim = 256;
  int vocab_size = 0;
  int embed_dim = 64;
  int layers = 2;
  int heads = 4;
  int ff_dim = 128;
  int max_len = 128;
  int lora_rank = 0;  // 0: no adapters
  std::uint64_t seed = 0;

  TextEncoderConfig text() const { return {vocab_size, embed_dim, layers, heads, ff_dim, max_len}; }
};

// Three-way classification: logits and softmax posteriors.
template <typename Scalar>
struct Classification {
  Vector<Scalar> logits;
  Vector<Scalar> posteriors;
};

template <typename Scalar>
Classification<Scalar> classify(const Vector<Scalar>& embedding, const Linear<Scalar>& head) {
  if (head.out_dim() != 3) throw Error("classify: three-way head expected");
  Classification<Scalar> c;
  c.logits = head.apply(embedding);
  c.posteriors = softmax(c.logits);
  return c;
}

// Late fusion: affine map over [e_a ; e_l].
template <typename Scalar>
Vector<Scalar> fuse(const Vector<Scalar>& acoustic, const Vector<Scalar>& text, const Linear<Scalar>& head) {
  if (acoustic.size() == 0 || text.size() == 0) throw Error("fuse: both modality embeddings are required");
  if (head.in_dim() != acoustic.size() + text.size())
    throw Error("fuse: head input dimension does not match the concatenated embeddings");
  Vector<Scalar> z(acoustic.size() + text.size());
  z << acoustic, text;
  return head.apply(z);
}

// One model input: the acoustic segment and/or one token sequence.
template <typename Scalar>
struct ModelView {
  const Matrix<Scalar>* frames = nullptr;
  std::span<const int> ids;
};

// Acoustic branch, text encoder, and either a three-way head or three
// independent binary task heads. Branches absent from the fusion mode are not
// constructed.
template <typename Scalar>
class TurnModel {
 public:
  TurnModel() = default;
  TurnModel(const ModelConfig& config, FusionOption fusion, HeadKind head)
      : config_(config), fusion_(fusion), head_kind_(head) {
    std::mt19937_64 rng(config.seed);
    if (uses_acoustic(fusion)) {
      acoustic_ = AcousticBranch<Scalar>(config.frame_dim, config.backbone_dim, config.proj_dim);
      acoustic_->init(rng);
    }
    if (uses_text(fusion)) {
      text_ = TextEncoder<Scalar>(config.text());
      text_->init(rng);
    }
    const auto in = embedding_dim();
    if (head == HeadKind::ThreeWay) {
      three_way_ = Linear<Scalar>(in, 3);
      three_way_.init(rng, 0.1);
    } else {
      for (auto& h : tasks_) {
        h = Linear<Scalar>(in, 1);
        h.init(rng, 0.1);
      }
    }
    if (config.lora_rank > 0) {
      const int r = config.lora_rank;
      config_.lora_rank = 0;
      apply_low_rank_adapters(r);
    }
  }

  const ModelConfig& config() const { return config_; }
  FusionOption fusion() const { return fusion_; }
  HeadKind head_kind() const { return head_kind_; }
  bool has_acoustic() const { return acoustic_.has_value(); }
  bool has_text() const { return text_.has_value(); }
  const AcousticBranch<Scalar>& acoustic() const { return *acoustic_; }
  const TextEncoder<Scalar>& text() const { return *text_; }
  const Linear<Scalar>& three_way_head() const { return three_way_; }
  const Linear<Scalar>& task_head(int s) const { return tasks_.at(check_task(s)); }

  Eigen::Index embedding_dim() const {
    Eigen::Index d = 0;
    if (uses_acoustic(fusion_)) d += config_.proj_dim;
    if (uses_text(fusion_)) d += config_.embed_dim;
    return d;
  }

  // Adds a zero-initialized low-rank delta to every attention projection of
  // the text encoder.
  void apply_low_rank_adapters(int rank) {
    if (!text_) throw Error("low-rank adapters need a text encoder");
    if (config_.lora_rank > 0) throw Error("low-rank adapters already applied");
    std::mt19937_64 rng(config_.seed ^ 0x9e3779b97f4a7c15ULL);
    text_->add_adapters(rank, rng);
    config_.lora_rank = rank;
  }

  // When false, the corresponding backward pass is skipped entirely.
  bool acoustic_grad = true;
  bool text_grad = true;

  struct Cache {
    typename AcousticBranch<Scalar>::Cache acoustic;
    typename TextEncoder<Scalar>::Cache text;
    Vector<Scalar> acoustic_embedding, text_embedding, z;
  };

  Vector<Scalar> embed(const ModelView<Scalar>& view, Cache& c) const {
    if (acoustic_) {
      if (!view.frames) throw Error("model: acoustic input required for fusion mode " + std::string(fusion_name(fusion_)));
      c.acoustic_embedding = acoustic_->forward(*view.frames, c.acoustic);
    }
    if (text_) c.text_embedding = text_->forward(view.ids, c.text);
    if (acoustic_ && text_) {
      c.z.resize(embedding_dim());
      c.z << c.acoustic_embedding, c.text_embedding;
    } else {
      c.z = acoustic_ ? c.acoustic_embedding : c.text_embedding;
    }
    return c.z;
  }

  Vector<Scalar> embed(const ModelView<Scalar>& view) const {
    Cache c;
    return embed(view, c);
  }

  void backward_embed(const Cache& c, const Vector<Scalar>& dz) {
    Eigen::Index offset = 0;
    if (acoustic_) {
      if (acoustic_grad) acoustic_->backward(c.acoustic, dz.head(config_.proj_dim));
      offset = config_.proj_dim;
    }
    if (text_ && text_grad) text_->backward(c.text, dz.segment(offset, config_.embed_dim));
  }

  Vector<Scalar> three_way_logits(const Vector<Scalar>& z) const {
    require(HeadKind::ThreeWay);
    return three_way_.apply(z);
  }

  Classification<Scalar> classify_view(const ModelView<Scalar>& view) const {
    require(HeadKind::ThreeWay);
    return classify(embed(view), three_way_);
  }

  Scalar task_logit(int s, const Vector<Scalar>& z) const {
    require(HeadKind::MultiTaskBinary);
    return tasks_[check_task(s)].apply(z)(0);
  }

  Scalar task_probability(int s, const ModelView<Scalar>& view) const { return logistic(task_logit(s, embed(view))); }

  // Routes the batch for instruction s exclusively through task head s.
  std::array<std::vector<Scalar>, 3> multitask_forward(const std::array<std::vector<ModelView<Scalar>>, 3>& batches) const {
    std::array<std::vector<Scalar>, 3> out;
    for (int s = 0; s < 3; ++s) {
      out[s].reserve(batches[s].size());
      for (const auto& v : batches[s]) out[s].push_back(task_probability(s, v));
    }
    return out;
  }

  // Mean cross-entropy over the batch; accumulates gradients when `grad`.
  Scalar three_way_loss(std::span<const ModelView<Scalar>> views, std::span<const int> labels, bool grad) {
    require(HeadKind::ThreeWay);
    if (views.size() != labels.size()) throw Error("three_way_loss: views and labels differ in length");
    if (views.empty()) return Scalar(0);
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(views.size());
    Scalar total = 0;
    Cache c;
    for (std::size_t i = 0; i < views.size(); ++i) {
      const Vector<Scalar> z = embed(views[i], c);
      const Vector<Scalar> logits = three_way_.apply(z);
      total += cross_entropy(logits, labels[i]);
      if (!grad) continue;
      Vector<Scalar> dlogits = softmax(logits) * inv_n;
      dlogits(labels[i]) -= inv_n;
      backward_embed(c, three_way_.backward_vec(z, dlogits));
    }
    return total * inv_n;
  }

  // Sum over tasks of the per-task mean BCE; accumulates gradients when `grad`.
  Scalar multitask_loss(const std::array<std::vector<ModelView<Scalar>>, 3>& batches,
                        const std::array<std::vector<int>, 3>& targets, bool grad) {
    require(HeadKind::MultiTaskBinary);
    Scalar total = 0;
    Cache c;
    for (int s = 0; s < 3; ++s) {
      const auto& views = batches[s];
      if (views.size() != targets[s].size()) throw Error("multitask_loss: views and targets differ in length");
      if (views.empty()) continue;
      const Scalar inv_n = Scalar(1) / static_cast<Scalar>(views.size());
      Scalar task_total = 0;
      for (std::size_t i = 0; i < views.size(); ++i) {
        const Vector<Scalar> z = embed(views[i], c);
        const Scalar p = logistic(tasks_[s].apply(z)(0));
        const Scalar y = static_cast<Scalar>(targets[s][i]);
        task_total += binary_cross_entropy(p, y);
        if (!grad) continue;
        Vector<Scalar> dlogit(1);
        dlogit(0) = binary_cross_entropy_logit_grad(p, y) * inv_n;
        backward_embed(c, tasks_[s].backward_vec(z, dlogit));
      }
      total += task_total * inv_n;
    }
    return total;
  }

  // Visits every parameter as (path, Parameter&).
  template <typename F>
  void visit(F&& f) {
    if (acoustic_) acoustic_->visit("acoustic", f);
    if (text_) text_->visit("text", f);
    if (head_kind_ == HeadKind::ThreeWay) {
      three_way_.visit("head", f);
    } else {
      for (int s = 0; s < 3; ++s) tasks_[s].visit("head.task" + std::to_string(s), f);
    }
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<TurnModel*>(this)->visit([&](const std::string& path, Parameter<Scalar>& p) {
      f(path, static_cast<const Parameter<Scalar>&>(p));
    });
  }

  void zero_grad() {
    visit([](const std::string&, Parameter<Scalar>& p) { p.zero_grad(); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Parameter<Scalar>& p) { n += static_cast<std::size_t>(p.size()); });
    return n;
  }

 private:
  static int check_task(int s) {
    if (s < 0 || s > 2) throw Error("instruction index out of range: " + std::to_string(s));
    return s;
  }
  void require(HeadKind k) const {
    if (head_kind_ != k) throw Error(std::string("model has a ") + head_name(head_kind_) + " head");
  }

  ModelConfig config_;
  FusionOption fusion_ = FusionOption::FusionOpt1;
  HeadKind head_kind_ = HeadKind::ThreeWay;
  std::optional<AcousticBranch<Scalar>> acoustic_;
  std::optional<TextEncoder<Scalar>> text_;
  Linear<Scalar> three_way_;
  std::array<Linear<Scalar>, 3> tasks_;
};

}  // namespace turnkit
