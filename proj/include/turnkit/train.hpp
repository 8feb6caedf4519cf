#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "turnkit/corpus.hpp"
#include "turnkit/features.hpp"
#include "turnkit/metrics.hpp"
#include "turnkit/model/checkpoint.hpp"
#include "turnkit/model/tokenizer.hpp"

namespace turnkit {

struct TrainConfig {
  double learning_rate = 5e-5;
  int epochs = 5;
  int batch_size = 4;
  FusionOption fusion = FusionOption::FusionOpt1;
  HeadKind head = HeadKind::ThreeWay;
  bool use_history = false;
  int history_len = 2;
  bool use_low_rank = false;
  int rank = 32;
  std::uint64_t seed = 0;
  // Architecture; vocab_size and frame_dim are filled in from the data.
  ModelConfig model;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;  // throws ConfigError
};

// Whether a parameter trains under the given mode:
//   AcousticOnly  acoustic projection + head
//   TextOnly      text encoder (adapters only, with low rank) + head
//   FusionOpt1    acoustic projection + text encoder (or adapters) + fusion head
//   FusionOpt2    fusion head only
// The acoustic backbone never trains.
bool is_trainable(FusionOption fusion, bool low_rank, const std::string& path);

class FreezePolicy {
 public:
  template <typename Scalar>
  static FreezePolicy for_model(const TurnModel<Scalar>& model, bool low_rank) {
    FreezePolicy p;
    model.visit([&](const std::string& path, const Parameter<Scalar>&) {
      if (is_trainable(model.fusion(), low_rank, path)) p.trainable_.insert(path);
    });
    return p;
  }

  bool trainable(const std::string& path) const { return trainable_.count(path) > 0; }
  const std::set<std::string>& paths() const { return trainable_; }
  bool any_with_prefix(const std::string& prefix) const;

 private:
  std::set<std::string> trainable_;
};

// Adaptive moment estimation over the trainable parameters of a model.
template <typename Scalar>
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(TurnModel<Scalar>& model, const FreezePolicy& policy) {
    ++t_;
    if (lr_ == 0.0) return;
    const Scalar c1 = Scalar(1) / Scalar(1 - std::pow(b1_, t_));
    const Scalar c2 = Scalar(1) / Scalar(1 - std::pow(b2_, t_));
    model.visit([&](const std::string& path, Parameter<Scalar>& p) {
      if (!policy.trainable(path)) return;
      auto& s = state_[path];
      if (s.m.size() == 0) {
        s.m.setZero(p.value.rows(), p.value.cols());
        s.v.setZero(p.value.rows(), p.value.cols());
      }
      s.m = Scalar(b1_) * s.m + Scalar(1 - b1_) * p.grad;
      s.v = Scalar(b2_) * s.v + Scalar(1 - b2_) * p.grad.cwiseAbs2();
      p.value.array() -=
          Scalar(lr_) * (s.m.array() * c1) / ((s.v.array() * c2).sqrt() + Scalar(eps_));
    });
  }

 private:
  struct State {
    Matrix<Scalar> m, v;
  };
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::map<std::string, State> state_;
};

// Text(s) fed to the text encoder for a sample: one for three-way heads,
// one per instruction for multi-task heads.
std::vector<std::string> model_texts(const Sample& s, HeadKind head, bool use_history);

struct EncodedExample {
  std::string sample_id;
  int label = 0;
  std::shared_ptr<const FrameMatrix> frames;
  std::vector<std::vector<int>> ids;  // 1 (three-way) or 3 (multi-task)
};

std::vector<EncodedExample> encode_samples(const std::vector<Sample>& samples, const Vocabulary& vocab,
                                           HeadKind head, bool use_history, const FrameSource* frames);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainResult {
  Checkpoint checkpoint;  // best epoch by validation loss
  std::vector<EpochLog> log;
  std::vector<std::string> warnings;
};

// Minibatch training. `init` checkpoints warm-start matching branches (head
// parameters are never copied); a text branch taken from `init` brings its
// vocabulary and text dimensions along.
TrainResult train(const TrainConfig& config, const std::vector<Sample>& train_samples,
                  const std::vector<Sample>& val_samples, const FrameSource* frames,
                  const std::vector<Checkpoint>& init = {});

// Mean loss of a model on encoded examples (no gradient).
double evaluate_loss(TurnModel<float>& model, const std::vector<EncodedExample>& examples);

// Three-way: softmax posteriors. Multi-task: logistic score of each task head.
std::vector<ScoreRecord> score_samples(const Checkpoint& checkpoint, const std::vector<Sample>& samples,
                                       const FrameSource* frames);

std::string training_log_jsonl(const std::vector<EpochLog>& log);

}  // namespace turnkit
