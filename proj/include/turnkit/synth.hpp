#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "turnkit/corpus.hpp"
#include "turnkit/features.hpp"

namespace turnkit {

struct SynthConfig {
  int n_sessions = 24;
  int sentences_per_session = 40;
  int vocab_size = 200;  // regular words + trigger tokens
  int frame_dim = 8;
  int frame_rate = 50;
  double acoustic_cue_strength = 0.8;
  double lexical_cue_strength = 0.8;
  double backchannel_rate = 0.06;  // per eligible word
  double turn_rate = 0.3;          // per sentence end
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

inline constexpr int kSynthTriggerTokens = 4;
inline constexpr int kSynthMeanSentenceWords = 7;
inline constexpr int kSynthMaxSentenceWords = 24;

// Backchannel phrases the generator emits; also written as the corpus lexicon.
const std::vector<std::string>& synth_backchannel_phrases();

struct TruthLabel {
  std::string speaker;
  int sentence_id = 0;
  int index = 0;  // 1-based position within the sentence
  std::string word;
  TurnEvent label = TurnEvent::ContinuingSpeech;
};

struct SynthCorpus {
  SynthConfig config;
  BackchannelLexicon lexicon;
  std::vector<DialogSession> sessions;
  std::map<std::string, std::vector<TruthLabel>> truth;  // by session id
  InMemoryFrames frames;
};

SynthCorpus generate(const SynthConfig& config);

// Layout: sessions/<id>.jsonl, features/<id>/<spk>_<sentence>.{f32,json},
// labels/<id>.jsonl, lexicon.txt, synth_config.json.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

struct RoundtripReport {
  std::size_t total = 0;
  std::size_t matched = 0;
  std::size_t speaker_changes = 0;
  std::array<std::size_t, 3> label_counts{};
  std::size_t warnings = 0;
  std::vector<std::string> diffs;

  double match_rate() const { return total ? static_cast<double>(matched) / total : 1.0; }
};

// Runs normalize -> extract -> label on every session and compares against
// the generator's labels.
RoundtripReport verify_roundtrip(const SynthCorpus& corpus);
RoundtripReport verify_roundtrip(const std::filesystem::path& corpus_dir);

std::string synth_config_json(const SynthConfig& c);

}  // namespace turnkit
