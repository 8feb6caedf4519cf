#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "turnkit/corpus.hpp"
#include "turnkit/synth.hpp"
#include "turnkit/train.hpp"

namespace turnkit {

struct PrepareConfig {
  SplitRatio split_ratio = kDefaultSplitRatio;
  std::size_t lexicon_size = 20;
  int history_len = 2;
  MalformedPolicy malformed = MalformedPolicy::DropWithWarning;
  bool downsample_val = true;
};

// Flat JSON configuration shared by all subcommands.
//
//   seed                 integer >= 0        (all randomness)
//   learning_rate        number              5e-5
//   epochs, batch_size   integer             5, 4
//   fusion               "acoustic" | "text" | "opt1" | "opt2"
//   head                 "three_way" | "multitask"
//   use_history          bool                false
//   history_len          integer             2
//   low_rank, rank       bool, integer       false, 32
//   backbone_dim, proj_dim, embed_dim, layers, heads, ff_dim, max_len
//   adam_beta1, adam_beta2, adam_eps
//   split_ratio          [train, val, test]  [2000, 300, 138]
//   lexicon_size         integer             20
//   malformed_policy     "drop" | "abort"
//   downsample_val       bool                true
//   n_sessions, sentences_per_session, vocab_size, frame_dim, frame_rate,
//   acoustic_cue, lexical_cue, backchannel_rate, turn_rate   (synth)
struct ToolkitConfig {
  TrainConfig train;
  PrepareConfig prepare;
  SynthConfig synth;

  std::uint64_t seed() const { return train.seed; }
  void set(const std::string& key, const nlohmann::json& value);  // throws ConfigError
  void validate() const;
  nlohmann::ordered_json to_json() const;
  std::string dump() const { return to_json().dump(2) + "\n"; }
};

ToolkitConfig parse_config(const std::string& text);
ToolkitConfig load_config(const std::filesystem::path& path);

}  // namespace turnkit
