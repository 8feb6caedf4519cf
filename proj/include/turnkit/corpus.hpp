#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "turnkit/error.hpp"

namespace turnkit {

// Class label. The integer encoding doubles as the instruction index.
enum class TurnEvent : int { ContinuingSpeech = 0, Backchannel = 1, TurnTaking = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<TurnEvent, 3> kAllEvents = {
    TurnEvent::ContinuingSpeech, TurnEvent::Backchannel, TurnEvent::TurnTaking};

inline int to_int(TurnEvent e) { return static_cast<int>(e); }
TurnEvent turn_event_from_int(int v);
const char* turn_event_name(TurnEvent e);

struct AlignedWord {
  std::string speaker;
  int sentence_id = 0;
  std::string text;
  double start = 0.0;
  double end = 0.0;

  bool operator==(const AlignedWord&) const = default;
};

struct DialogSession {
  std::string session_id;
  std::vector<AlignedWord> words;

  // Distinct speaker ids in order of first appearance.
  std::vector<std::string> speakers() const;
};

class BackchannelLexicon {
 public:
  static constexpr int kMaxWords = 2;
  static constexpr std::size_t kDefaultSize = 20;

  BackchannelLexicon() = default;
  explicit BackchannelLexicon(const std::vector<std::string>& phrases);

  // Adds a phrase after lowercasing and whitespace normalization. Throws if
  // it has zero or more than two tokens.
  void add(const std::string& phrase);
  bool contains(const std::string& phrase) const { return phrases_.count(phrase) > 0; }
  const std::set<std::string>& phrases() const { return phrases_; }
  std::size_t size() const { return phrases_.size(); }

  // The `size` most frequent isolated one/two-word sentences across the given
  // (normalized) sessions. Ties are broken lexicographically.
  static BackchannelLexicon from_corpus(const std::vector<DialogSession>& sessions,
                                        std::size_t size = kDefaultSize);

 private:
  std::set<std::string> phrases_;
};

struct LabeledWord {
  AlignedWord word;
  TurnEvent label = TurnEvent::ContinuingSpeech;
};

struct BackchannelCandidate {
  std::string phrase;
  std::string speaker;
  double start = 0.0;
  double end = 0.0;
  // The removed words, kept for reinsertion.
  std::vector<AlignedWord> words;
};

inline constexpr const char* kSelfMark = "<spkSelf>";
inline constexpr const char* kOtherMark = "<spkOther>";

struct HistoryEntry {
  bool self = false;  // spoken by the sample's own speaker
  std::vector<std::string> tokens;
};

struct AcousticRef {
  std::string session_id;
  std::string speaker;
  int sentence_id = 0;
  double start = 0.0;  // sentence start
  double end = 0.0;    // target word end
};

struct Sample {
  std::string sample_id;
  std::string session_id;
  std::string speaker;
  std::vector<std::string> tokens;
  AcousticRef acoustic_ref;
  std::vector<HistoryEntry> history;
  TurnEvent label = TurnEvent::ContinuingSpeech;
};

enum class Split { Train, Validation, Test };
const char* split_name(Split s);
Split split_from_name(const std::string& name);

using SplitAssignment = std::map<std::string, Split>;

// ---- normalization -------------------------------------------------------

enum class MalformedPolicy { DropWithWarning, Abort };

// Normalizes a single token. Returns std::nullopt when the token is removed.
// Throws on malformed brackets under MalformedPolicy::Abort.
std::optional<std::string> normalize_token(const std::string& token,
                                           MalformedPolicy policy = MalformedPolicy::DropWithWarning,
                                           Diagnostics* diag = nullptr);

std::vector<AlignedWord> normalize_words(const std::vector<AlignedWord>& raw,
                                         MalformedPolicy policy = MalformedPolicy::DropWithWarning,
                                         Diagnostics* diag = nullptr);

// ---- labeling ------------------------------------------------------------

struct ExtractResult {
  DialogSession pruned;
  std::vector<BackchannelCandidate> candidates;
};

ExtractResult extract_backchannel_candidates(const DialogSession& session,
                                             const BackchannelLexicon& lexicon);

struct LabelStats {
  std::size_t speaker_changes = 0;
  std::size_t backchannels = 0;
  std::size_t dropped_candidates = 0;
  std::size_t collisions = 0;  // candidate landed on a TurnTaking word
};

std::vector<LabeledWord> serialize_and_label(const DialogSession& pruned,
                                             const std::vector<BackchannelCandidate>& candidates,
                                             LabelStats* stats = nullptr);

std::vector<Sample> build_samples(const std::string& session_id,
                                  const std::vector<LabeledWord>& labeled,
                                  std::size_t history_len = 2);

// Word stream of a session in start-time order (stable for ties).
std::vector<AlignedWord> serialize_words(const DialogSession& session);

std::size_t count_speaker_changes(const std::vector<AlignedWord>& stream);

// ---- splitting / balancing ----------------------------------------------

using SplitRatio = std::array<double, 3>;
inline constexpr SplitRatio kDefaultSplitRatio = {2000.0, 300.0, 138.0};

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatio& ratio = kDefaultSplitRatio);

SplitAssignment split_sessions(const std::vector<std::string>& session_ids,
                               const SplitRatio& ratio = kDefaultSplitRatio);

std::size_t downsample_target(std::size_t n_backchannel, std::size_t n_turn);

std::vector<Sample> downsample_continuing(const std::vector<Sample>& samples, std::uint64_t rng_seed);

std::array<std::size_t, 3> class_counts(const std::vector<Sample>& samples);

}  // namespace turnkit
