#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "turnkit/config.hpp"
#include "turnkit/corpus.hpp"

namespace turnkit {

struct PrepareStats {
  std::size_t sessions = 0;
  std::size_t words = 0;
  std::size_t speaker_changes = 0;
  std::size_t backchannels = 0;
  std::size_t dropped_candidates = 0;
  std::size_t collisions = 0;
  std::size_t warnings = 0;
  std::array<std::array<std::size_t, 3>, 3> counts_before{};  // [split][class]
  std::array<std::array<std::size_t, 3>, 3> counts_after{};
};

struct PreparedData {
  SplitAssignment splits;
  BackchannelLexicon lexicon;
  std::array<std::vector<Sample>, 3> samples;  // train, val, test
  PrepareStats stats;
  std::vector<std::string> warnings;
};

// Normalize, split, label, build samples and downsample. Without a lexicon,
// one is derived from the training sessions.
PreparedData prepare_sessions(std::vector<DialogSession> sessions, const PrepareConfig& config, std::uint64_t seed,
                              const std::optional<BackchannelLexicon>& lexicon = std::nullopt);

// Corpus directory -> labeled, split and balanced samples. Session files are
// read from <corpus>/sessions (or <corpus> itself). The lexicon comes from
// `lexicon_file`, else <corpus>/lexicon.txt, else the training sessions.
PreparedData prepare_corpus(const std::filesystem::path& corpus_dir, const PrepareConfig& config, std::uint64_t seed,
                            const std::optional<std::filesystem::path>& lexicon_file = std::nullopt);

// train.jsonl, val.jsonl, test.jsonl, splits.json, lexicon.txt, stats.json
void write_prepared(const PreparedData& data, const std::filesystem::path& out_dir,
                    const std::filesystem::path& corpus_dir);

// Entry point: `turnkit <synth|prepare|train|score|evaluate|report> ...`.
// Returns 0 on success, 2 on usage errors, 1 on any other failure.
int run(int argc, const char* const* argv);

}  // namespace turnkit
