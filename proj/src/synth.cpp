#include "turnkit/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "turnkit/corpus_io.hpp"
#include "turnkit/manifest.hpp"

namespace turnkit {

namespace {

constexpr double kFrameNoise = 0.5;
constexpr double kCueOffset = 2.0;

void check_unit(const char* key, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must be in [0, 1]");
}

std::string session_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth_%04d", i);
  return buf;
}

struct SessionBuilder {
  const SynthConfig& cfg;
  std::mt19937_64 rng;
  DialogSession session;
  std::vector<TruthLabel> truth;
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> sentence_words;
  std::map<std::string, int> next_sentence;

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(rng); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

  void add_word(const std::string& speaker, int sentence, const std::string& text, double start, double end,
                TurnEvent label) {
    auto& members = sentence_words[{speaker, sentence}];
    session.words.push_back({speaker, sentence, text, start, end});
    truth.push_back({speaker, sentence, static_cast<int>(members.size()) + 1, text, label});
    members.push_back(session.words.size() - 1);
  }

  void add_backchannel(const std::string& listener, double at) {
    const auto& phrases = synth_backchannel_phrases();
    std::istringstream in(phrases[pick(static_cast<int>(phrases.size()))]);
    const int sid = next_sentence[listener]++;
    double t = at;
    for (std::string w; in >> w;) {
      const double d = uniform(0.15, 0.3);
      add_word(listener, sid, w, t, t + d, TurnEvent::ContinuingSpeech);
      t += d + 0.02;
    }
  }

  void run() {
    const int n_regular = cfg.vocab_size - kSynthTriggerTokens;
    const std::array<std::string, 2> speakers = {"A", "B"};
    std::geometric_distribution<int> extra_words(1.0 / kSynthMeanSentenceWords);
    const double a = cfg.acoustic_cue_strength;
    int current = 0;
    double t = uniform(0.0, 0.5);
    for (int i = 0; i < cfg.sentences_per_session; ++i) {
      const std::string& spk = speakers[current];
      const std::string& listener = speakers[1 - current];
      const int len = std::min(1 + extra_words(rng), kSynthMaxSentenceWords);
      const bool turn_final = i + 1 < cfg.sentences_per_session && bernoulli(cfg.turn_rate);
      const int sid = next_sentence[spk]++;
      for (int k = 0; k < len; ++k) {
        const bool last = k + 1 == len;
        double dur = uniform(0.15, 0.45);
        TurnEvent label = TurnEvent::ContinuingSpeech;
        std::string text = "w" + std::to_string(pick(n_regular));
        if (last && turn_final) {
          label = TurnEvent::TurnTaking;
          dur *= 1.0 + a;
        } else if (bernoulli(cfg.backchannel_rate)) {
          label = TurnEvent::Backchannel;
          if (bernoulli(cfg.lexical_cue_strength)) text = "cue" + std::to_string(pick(kSynthTriggerTokens));
        }
        add_word(spk, sid, text, t, t + dur, label);
        if (label == TurnEvent::Backchannel) add_backchannel(listener, t + uniform(0.2, 0.8) * dur);
        t += dur + uniform(0.0, 0.05);
      }
      t += uniform(0.2, 0.6);
      if (turn_final) current = 1 - current;
    }
  }

  void emit_frames(InMemoryFrames& out) {
    std::normal_distribution<double> noise(0.0, kFrameNoise);
    const double rate = cfg.frame_rate;
    const double offset = kCueOffset * cfg.acoustic_cue_strength;
    for (const auto& [key, members] : sentence_words) {
      const double start = session.words[members.front()].start;
      const double end = session.words[members.back()].end;
      const auto rows = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil((end - start) * rate)));
      FrameMatrix f(rows, cfg.frame_dim);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (int c = 0; c < cfg.frame_dim; ++c) f(r, c) = static_cast<float>(noise(rng));
      for (auto wi : members) {
        if (truth[wi].label != TurnEvent::TurnTaking) continue;
        const auto& w = session.words[wi];
        for (Eigen::Index r = 0; r < rows; ++r) {
          const double tau = start + (static_cast<double>(r) + 0.5) / rate;
          if (tau < w.start || tau >= w.end) continue;
          for (int c = 0; c < std::min(2, cfg.frame_dim); ++c) f(r, c) += static_cast<float>(offset);
        }
      }
      out.add({session.session_id, key.first, key.second}, {std::move(f), rate});
    }
  }
};

}  // namespace

void SynthConfig::validate() const {
  if (n_sessions < 1) throw ConfigError("n_sessions", "must be positive");
  if (sentences_per_session < 1) throw ConfigError("sentences_per_session", "must be positive");
  if (frame_dim < 1) throw ConfigError("frame_dim", "must be positive");
  if (frame_rate < 1) throw ConfigError("frame_rate", "must be positive");
  check_unit("acoustic_cue", acoustic_cue_strength);
  check_unit("lexical_cue", lexical_cue_strength);
  check_unit("backchannel_rate", backchannel_rate);
  check_unit("turn_rate", turn_rate);
  if (vocab_size < kSynthTriggerTokens + 8)
    throw ConfigError("vocab_size", "too small to host " + std::to_string(kSynthTriggerTokens) +
                                        " trigger tokens plus 8 regular words");
}

const std::vector<std::string>& synth_backchannel_phrases() {
  static const std::vector<std::string> phrases = {"yeah", "uh-huh", "mmhmm", "right",
                                                   "okay", "oh okay", "i see", "oh really"};
  return phrases;
}

SynthCorpus generate(const SynthConfig& config) {
  config.validate();
  SynthCorpus corpus;
  corpus.config = config;
  corpus.lexicon = BackchannelLexicon(synth_backchannel_phrases());
  for (int i = 0; i < config.n_sessions; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    SessionBuilder b{config, std::mt19937_64(seq), {}, {}, {}, {}};
    b.session.session_id = session_name(i);
    b.run();
    b.emit_frames(corpus.frames);
    corpus.truth[b.session.session_id] = std::move(b.truth);
    corpus.sessions.push_back(std::move(b.session));
  }
  return corpus;
}

std::string synth_config_json(const SynthConfig& c) {
  nlohmann::ordered_json j = {{"n_sessions", c.n_sessions},
                              {"sentences_per_session", c.sentences_per_session},
                              {"vocab_size", c.vocab_size},
                              {"frame_dim", c.frame_dim},
                              {"frame_rate", c.frame_rate},
                              {"acoustic_cue", c.acoustic_cue_strength},
                              {"lexical_cue", c.lexical_cue_strength},
                              {"backchannel_rate", c.backchannel_rate},
                              {"turn_rate", c.turn_rate},
                              {"seed", c.seed}};
  return j.dump(2) + "\n";
}

namespace {

std::string truth_jsonl(const std::vector<TruthLabel>& labels) {
  std::string out;
  for (const auto& t : labels) {
    nlohmann::ordered_json j = {{"speaker", t.speaker}, {"sentence_id", t.sentence_id}, {"index", t.index},
                                {"word", t.word},       {"label", to_int(t.label)}};
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<TruthLabel> read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<TruthLabel> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("speaker").get<std::string>(), j.at("sentence_id").get<int>(), j.at("index").get<int>(),
                   j.at("word").get<std::string>(), turn_event_from_int(j.at("label").get<int>())});
  }
  return out;
}

RoundtripReport compare(const std::vector<DialogSession>& sessions,
                        const std::map<std::string, std::vector<TruthLabel>>& truth,
                        const BackchannelLexicon& lexicon) {
  RoundtripReport r;
  for (const auto& raw : sessions) {
    Diagnostics diag;
    DialogSession s{raw.session_id, normalize_words(raw.words, MalformedPolicy::DropWithWarning, &diag)};
    r.warnings += diag.warnings.size();
    auto extracted = extract_backchannel_candidates(s, lexicon);
    LabelStats stats;
    const auto labeled = serialize_and_label(extracted.pruned, extracted.candidates, &stats);
    r.speaker_changes += stats.speaker_changes;

    std::map<std::tuple<std::string, int, int>, TurnEvent> produced;
    std::map<std::pair<std::string, int>, int> position;
    for (const auto& lw : labeled) {
      const int idx = ++position[{lw.word.speaker, lw.word.sentence_id}];
      produced[{lw.word.speaker, lw.word.sentence_id, idx}] = lw.label;
      ++r.label_counts[to_int(lw.label)];
    }
    auto it = truth.find(s.session_id);
    if (it == truth.end()) {
      r.diffs.push_back(s.session_id + ": no ground truth");
      continue;
    }
    for (const auto& t : it->second) {
      ++r.total;
      auto p = produced.find({t.speaker, t.sentence_id, t.index});
      if (p == produced.end()) {
        r.diffs.push_back(s.session_id + " " + t.speaker + std::to_string(t.sentence_id) + "#" +
                          std::to_string(t.index) + ": word missing from pipeline output");
      } else if (p->second != t.label) {
        r.diffs.push_back(s.session_id + " " + t.speaker + std::to_string(t.sentence_id) + "#" +
                          std::to_string(t.index) + " '" + t.word + "': expected " + turn_event_name(t.label) +
                          ", got " + turn_event_name(p->second));
      } else {
        ++r.matched;
      }
    }
    if (produced.size() != it->second.size())
      r.diffs.push_back(s.session_id + ": pipeline produced " + std::to_string(produced.size()) + " words, truth has " +
                        std::to_string(it->second.size()));
  }
  return r;
}

}  // namespace

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  for (const auto& s : corpus.sessions) {
    std::ostringstream ss;
    write_session(ss, s);
    write_file_atomic(dir / "sessions" / (s.session_id + ".jsonl"), ss.str());
    write_file_atomic(dir / "labels" / (s.session_id + ".jsonl"), truth_jsonl(corpus.truth.at(s.session_id)));
  }
  for (const auto& [key, f] : corpus.frames.sentences())
    write_features(feature_path(dir, std::get<0>(key), std::get<1>(key), std::get<2>(key)), f);
  std::ostringstream lex;
  write_lexicon(lex, corpus.lexicon);
  write_file_atomic(dir / "lexicon.txt", lex.str());
  write_file_atomic(dir / "synth_config.json", synth_config_json(corpus.config));
}

RoundtripReport verify_roundtrip(const SynthCorpus& corpus) {
  return compare(corpus.sessions, corpus.truth, corpus.lexicon);
}

RoundtripReport verify_roundtrip(const std::filesystem::path& dir) {
  std::vector<DialogSession> sessions;
  std::map<std::string, std::vector<TruthLabel>> truth;
  for (const auto& f : list_session_files(dir / "sessions")) {
    sessions.push_back(read_session_file(f));
    truth[sessions.back().session_id] = read_truth(dir / "labels" / f.filename());
  }
  return compare(sessions, truth, read_lexicon_file(dir / "lexicon.txt"));
}

}  // namespace turnkit
