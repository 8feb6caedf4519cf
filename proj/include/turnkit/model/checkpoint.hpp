#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "turnkit/model/model.hpp"

namespace turnkit {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  std::size_t trainable_parameters = 0;
  std::size_t total_parameters = 0;

  double trainable_fraction() const {
    return total_parameters ? static_cast<double>(trainable_parameters) / total_parameters : 0.0;
  }
};

// Everything needed to rebuild and run a trained model.
//
// File layout (all integers little-endian):
//   bytes 0..7   magic "TURNKIT\x01"
//   bytes 8..15  uint64 manifest length N
//   next N bytes UTF-8 JSON manifest: config, fusion, head, text options,
//                vocabulary, metadata and a parameter index
//                [{path, rows, cols, offset, trainable}]
//   remainder    float32 arrays, row-major, at `offset` floats from the start
//                of this section
struct Checkpoint {
  ModelConfig config;
  FusionOption fusion = FusionOption::FusionOpt1;
  HeadKind head = HeadKind::ThreeWay;
  bool use_history = false;
  int history_len = 2;
  std::vector<std::string> vocabulary;
  std::map<std::string, Matrix<float>> parameters;
  std::set<std::string> trainable;
  CheckpointMeta meta;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_bytes(const Checkpoint& ckpt);
Checkpoint checkpoint_from_bytes(const std::string& bytes);

// Copies parameter values into `ckpt.parameters` (float32).
template <typename Scalar>
void store_parameters(const TurnModel<Scalar>& model, Checkpoint& ckpt) {
  ckpt.config = model.config();
  ckpt.fusion = model.fusion();
  ckpt.head = model.head_kind();
  ckpt.parameters.clear();
  model.visit([&](const std::string& path, const Parameter<Scalar>& p) {
    ckpt.parameters[path] = p.value.template cast<float>();
  });
}

template <typename Scalar>
TurnModel<Scalar> model_from_checkpoint(const Checkpoint& ckpt) {
  TurnModel<Scalar> model(ckpt.config, ckpt.fusion, ckpt.head);
  std::size_t used = 0;
  model.visit([&](const std::string& path, Parameter<Scalar>& p) {
    auto it = ckpt.parameters.find(path);
    if (it == ckpt.parameters.end()) throw Error("checkpoint is missing parameter " + path);
    if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols())
      throw Error("checkpoint parameter " + path + " has the wrong shape");
    p.value = it->second.template cast<Scalar>();
    ++used;
  });
  if (used != ckpt.parameters.size()) throw Error("checkpoint has parameters the model does not use");
  return model;
}

}  // namespace turnkit
