#include "turnkit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace turnkit {

TurnEvent turn_event_from_int(int v) {
  if (v < 0 || v >= kNumClasses) throw Error("turn event out of range: " + std::to_string(v));
  return static_cast<TurnEvent>(v);
}

const char* turn_event_name(TurnEvent e) {
  switch (e) {
    case TurnEvent::ContinuingSpeech: return "continuing_speech";
    case TurnEvent::Backchannel: return "backchannel";
    case TurnEvent::TurnTaking: return "turn_taking";
  }
  return "?";
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "validation" || name == "val") return Split::Validation;
  if (name == "test") return Split::Test;
  throw Error("unknown split name: " + name);
}

std::vector<std::string> DialogSession::speakers() const {
  std::vector<std::string> out;
  for (const auto& w : words)
    if (std::find(out.begin(), out.end(), w.speaker) == out.end()) out.push_back(w.speaker);
  return out;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> toks;
  for (std::string t; in >> t;) toks.push_back(t);
  return toks;
}

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

// Indices of words grouped by (speaker, sentence_id), groups in order of first
// appearance, members sorted by start.
struct SentenceGroup {
  std::string speaker;
  int sentence_id = 0;
  std::vector<std::size_t> members;
};

std::vector<SentenceGroup> group_sentences(const std::vector<AlignedWord>& words) {
  std::vector<SentenceGroup> groups;
  std::map<std::pair<std::string, int>, std::size_t> index;
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto key = std::make_pair(words[i].speaker, words[i].sentence_id);
    auto [it, inserted] = index.try_emplace(key, groups.size());
    if (inserted) groups.push_back({words[i].speaker, words[i].sentence_id, {}});
    groups[it->second].members.push_back(i);
  }
  for (auto& g : groups)
    std::stable_sort(g.members.begin(), g.members.end(),
                     [&](std::size_t a, std::size_t b) { return words[a].start < words[b].start; });
  return groups;
}

}  // namespace

BackchannelLexicon::BackchannelLexicon(const std::vector<std::string>& phrases) {
  for (const auto& p : phrases) add(p);
}

void BackchannelLexicon::add(const std::string& phrase) {
  std::string lowered = phrase;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  const auto toks = split_ws(lowered);
  if (toks.empty() || static_cast<int>(toks.size()) > kMaxWords)
    throw Error("backchannel phrase must have 1 or 2 words: '" + phrase + "'");
  phrases_.insert(join(toks));
}

BackchannelLexicon BackchannelLexicon::from_corpus(const std::vector<DialogSession>& sessions, std::size_t size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sessions) {
    for (const auto& g : group_sentences(s.words)) {
      if (g.members.empty() || static_cast<int>(g.members.size()) > kMaxWords) continue;
      std::vector<std::string> toks;
      for (auto i : g.members) toks.push_back(s.words[i].text);
      ++counts[join(toks)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  BackchannelLexicon lex;
  for (std::size_t i = 0; i < ranked.size() && i < size; ++i) lex.add(ranked[i].first);
  return lex;
}

ExtractResult extract_backchannel_candidates(const DialogSession& session, const BackchannelLexicon& lexicon) {
  ExtractResult result;
  result.pruned.session_id = session.session_id;
  std::vector<bool> removed(session.words.size(), false);
  for (const auto& g : group_sentences(session.words)) {
    if (g.members.empty() || static_cast<int>(g.members.size()) > BackchannelLexicon::kMaxWords) continue;
    std::vector<std::string> toks;
    for (auto i : g.members) toks.push_back(session.words[i].text);
    const std::string phrase = join(toks);
    if (!lexicon.contains(phrase)) continue;
    BackchannelCandidate c;
    c.phrase = phrase;
    c.speaker = g.speaker;
    c.start = session.words[g.members.front()].start;
    c.end = session.words[g.members.back()].end;
    for (auto i : g.members) {
      c.words.push_back(session.words[i]);
      removed[i] = true;
    }
    result.candidates.push_back(std::move(c));
  }
  std::stable_sort(result.candidates.begin(), result.candidates.end(),
                   [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < session.words.size(); ++i)
    if (!removed[i]) result.pruned.words.push_back(session.words[i]);
  return result;
}

std::vector<AlignedWord> serialize_words(const DialogSession& session) {
  std::vector<AlignedWord> stream = session.words;
  std::stable_sort(stream.begin(), stream.end(),
                   [](const AlignedWord& a, const AlignedWord& b) { return a.start < b.start; });
  return stream;
}

std::size_t count_speaker_changes(const std::vector<AlignedWord>& stream) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < stream.size(); ++i)
    if (stream[i].speaker != stream[i - 1].speaker) ++n;
  return n;
}

std::vector<LabeledWord> serialize_and_label(const DialogSession& pruned,
                                             const std::vector<BackchannelCandidate>& candidates,
                                             LabelStats* stats) {
  LabelStats local;
  const auto stream = serialize_words(pruned);
  std::vector<TurnEvent> labels(stream.size(), TurnEvent::ContinuingSpeech);

  for (std::size_t i = 0; i + 1 < stream.size(); ++i) {
    if (stream[i].speaker != stream[i + 1].speaker) {
      labels[i] = TurnEvent::TurnTaking;
      ++local.speaker_changes;
    }
  }

  for (const auto& c : candidates) {
    // Other speaker's word with the largest start <= candidate start.
    std::optional<std::size_t> hit;
    for (std::size_t j = 0; j < stream.size() && stream[j].start <= c.start; ++j)
      if (stream[j].speaker != c.speaker) hit = j;
    if (!hit) {
      ++local.dropped_candidates;
      continue;
    }
    if (labels[*hit] == TurnEvent::TurnTaking) {
      ++local.collisions;
      continue;
    }
    labels[*hit] = TurnEvent::Backchannel;
    ++local.backchannels;
  }

  // Merge the reinserted candidate words back in start order; on equal start
  // the pruned-stream word comes first.
  struct Entry {
    LabeledWord lw;
    int origin;
    std::size_t index;
  };
  std::vector<Entry> merged;
  merged.reserve(stream.size());
  for (std::size_t i = 0; i < stream.size(); ++i) merged.push_back({{stream[i], labels[i]}, 0, i});
  std::size_t k = 0;
  for (const auto& c : candidates)
    for (const auto& w : c.words) merged.push_back({{w, TurnEvent::ContinuingSpeech}, 1, k++});
  std::stable_sort(merged.begin(), merged.end(), [](const Entry& a, const Entry& b) {
    if (a.lw.word.start != b.lw.word.start) return a.lw.word.start < b.lw.word.start;
    if (a.origin != b.origin) return a.origin < b.origin;
    return a.index < b.index;
  });

  std::vector<LabeledWord> out;
  out.reserve(merged.size());
  for (auto& e : merged) out.push_back(std::move(e.lw));
  if (stats) *stats = local;
  return out;
}

std::vector<Sample> build_samples(const std::string& session_id, const std::vector<LabeledWord>& labeled,
                                  std::size_t history_len) {
  std::vector<AlignedWord> words;
  words.reserve(labeled.size());
  for (const auto& lw : labeled) words.push_back(lw.word);
  const auto groups = group_sentences(words);

  struct Span {
    double start, end;
  };
  std::vector<Span> spans;
  for (const auto& g : groups)
    spans.push_back({words[g.members.front()].start, words[g.members.back()].end});

  // Sentences ordered by end time, for history lookup.
  std::vector<std::size_t> by_end(groups.size());
  std::iota(by_end.begin(), by_end.end(), 0);
  std::stable_sort(by_end.begin(), by_end.end(), [&](std::size_t a, std::size_t b) {
    if (spans[a].end != spans[b].end) return spans[a].end < spans[b].end;
    return spans[a].start < spans[b].start;
  });

  std::vector<Sample> samples;
  samples.reserve(labeled.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];

    std::vector<HistoryEntry> history;
    for (auto it = by_end.rbegin(); it != by_end.rend() && history.size() < history_len; ++it) {
      if (*it == gi || spans[*it].end > spans[gi].start) continue;
      HistoryEntry h;
      h.self = groups[*it].speaker == g.speaker;
      for (auto i : groups[*it].members) h.tokens.push_back(words[i].text);
      history.push_back(std::move(h));
    }
    std::reverse(history.begin(), history.end());

    std::vector<std::string> prefix;
    for (std::size_t k = 0; k < g.members.size(); ++k) {
      const auto wi = g.members[k];
      prefix.push_back(words[wi].text);
      Sample s;
      s.sample_id = session_id + "_" + g.speaker + std::to_string(g.sentence_id) + "_" + std::to_string(k + 1);
      s.session_id = session_id;
      s.speaker = g.speaker;
      s.tokens = prefix;
      s.acoustic_ref = {session_id, g.speaker, g.sentence_id, spans[gi].start, words[wi].end};
      s.history = history;
      s.label = labeled[wi].label;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatio& ratio) {
  for (double r : ratio)
    if (!(r > 0.0) || !std::isfinite(r)) throw Error("split ratio components must be positive");
  if (n < 3) throw Error("need at least 3 sessions to form train/validation/test splits, got " + std::to_string(n));

  const double total = ratio[0] + ratio[1] + ratio[2];
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * ratio[i] / total;
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - std::floor(exact);
    assigned += sizes[i];
  }
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];

  // Every split gets at least one session, taken from the largest.
  for (int i = 0; i < 3; ++i) {
    if (sizes[i] > 0) continue;
    auto largest = std::max_element(sizes.begin(), sizes.end());
    --*largest;
    sizes[i] = 1;
  }
  return sizes;
}

SplitAssignment split_sessions(const std::vector<std::string>& session_ids, const SplitRatio& ratio) {
  if (session_ids.empty()) throw Error("no sessions to split");
  const auto sizes = split_sizes(session_ids.size(), ratio);
  SplitAssignment out;
  std::size_t i = 0;
  const std::array<Split, 3> names = {Split::Train, Split::Validation, Split::Test};
  for (int k = 0; k < 3; ++k)
    for (std::size_t j = 0; j < sizes[k]; ++j, ++i) {
      if (!out.emplace(session_ids[i], names[k]).second)
        throw Error("duplicate session id: " + session_ids[i]);
    }
  return out;
}

std::size_t downsample_target(std::size_t n_backchannel, std::size_t n_turn) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n_backchannel + n_turn) / 2.0));
}

std::array<std::size_t, 3> class_counts(const std::vector<Sample>& samples) {
  std::array<std::size_t, 3> c{};
  for (const auto& s : samples) ++c[to_int(s.label)];
  return c;
}

std::vector<Sample> downsample_continuing(const std::vector<Sample>& samples, std::uint64_t rng_seed) {
  const auto counts = class_counts(samples);
  const std::size_t target = downsample_target(counts[1], counts[2]);
  if (counts[0] <= target) return samples;

  std::vector<std::size_t> continuing;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].label == TurnEvent::ContinuingSpeech) continuing.push_back(i);
  std::vector<std::size_t> kept;
  std::mt19937_64 rng(rng_seed);
  std::sample(continuing.begin(), continuing.end(), std::back_inserter(kept), target, rng);

  std::vector<bool> keep(samples.size(), true);
  for (auto i : continuing) keep[i] = false;
  for (auto i : kept) keep[i] = true;
  std::vector<Sample> out;
  out.reserve(samples.size() - counts[0] + target);
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (keep[i]) out.push_back(samples[i]);
  return out;
}

}  // namespace turnkit
