#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "support.hpp"
#include "turnkit/corpus.hpp"
#include "turnkit/corpus_io.hpp"

using namespace turnkit;
using turnkit::testing::hand_labels;
using turnkit::testing::hand_lexicon;
using turnkit::testing::hand_session;

namespace {

std::vector<LabeledWord> label_session(const DialogSession& raw, const BackchannelLexicon& lex,
                                       LabelStats* stats = nullptr) {
  DialogSession s = raw;
  s.words = normalize_words(raw.words);
  const auto ex = extract_backchannel_candidates(s, lex);
  return serialize_and_label(ex.pruned, ex.candidates, stats);
}

DialogSession make(std::initializer_list<AlignedWord> words) {
  DialogSession s;
  s.session_id = "t";
  s.words = words;
  return s;
}

Sample sample_with(TurnEvent label, int i) {
  Sample s;
  s.sample_id = "s" + std::to_string(i);
  s.label = label;
  return s;
}

}  // namespace

TEST_CASE("normalize_token rule table") {
  CHECK_FALSE(normalize_token("[silence]").has_value());
  CHECK_FALSE(normalize_token("[noise]").has_value());
  CHECK(normalize_token("yeah") == "yeah");
  CHECK(normalize_token("[cuz/because]") == "because");
  CHECK(normalize_token("reali[zing]-") == "realizing");
  CHECK(normalize_token("[laughter-yes]") == "yes");
  CHECK(normalize_token("Hello") == "hello");
  CHECK(normalize_token("uh-huh") == "uh-huh");
}

TEST_CASE("malformed brackets follow the policy") {
  Diagnostics d;
  CHECK_FALSE(normalize_token("re[al[ly]]", MalformedPolicy::DropWithWarning, &d).has_value());
  CHECK(d.warnings.size() == 1);
  CHECK_FALSE(normalize_token("abc]", MalformedPolicy::DropWithWarning, &d).has_value());
  CHECK_THROWS_AS(normalize_token("[abc", MalformedPolicy::Abort), Error);
}

TEST_CASE("normalize_words drops removed tokens and keeps timing") {
  const auto out = normalize_words({{"A", 0, "[noise]", 0, 1}, {"A", 0, "So", 1, 2}});
  REQUIRE(out.size() == 1);
  CHECK(out[0] == AlignedWord{"A", 0, "so", 1, 2});
}

TEST_CASE("backchannel extraction takes isolated one and two word sentences only") {
  const BackchannelLexicon lex = hand_lexicon();
  const auto s = make({{"A", 0, "we", 0.0, 0.2},
                       {"A", 0, "went", 0.2, 0.5},
                       {"B", 0, "uh-huh", 0.3, 0.5},
                       {"B", 1, "yeah", 1.0, 1.2},
                       {"B", 1, "we", 1.2, 1.4},
                       {"B", 1, "did", 1.4, 1.6},
                       {"B", 1, "that", 1.6, 1.8},
                       {"A", 1, "oh", 2.0, 2.1},
                       {"A", 1, "okay", 2.1, 2.3}});
  const auto ex = extract_backchannel_candidates(s, lex);
  REQUIRE(ex.candidates.size() == 2);
  CHECK(ex.candidates[0].phrase == "uh-huh");
  CHECK(ex.candidates[0].speaker == "B");
  CHECK(ex.candidates[0].start == doctest::Approx(0.3));
  CHECK(ex.candidates[0].end == doctest::Approx(0.5));
  CHECK(ex.candidates[1].phrase == "oh okay");
  CHECK(ex.pruned.words.size() == 6);
  for (const auto& w : ex.pruned.words) CHECK(w.text != "uh-huh");
}

TEST_CASE("lexicon rejects phrases longer than two words") {
  BackchannelLexicon lex;
  CHECK_THROWS_AS(lex.add("i see that"), Error);
  lex.add("  I   See ");
  CHECK(lex.contains("i see"));
}

TEST_CASE("data-driven lexicon counts isolated short sentences") {
  const auto s = make({{"A", 0, "yeah", 0, 1}, {"A", 1, "yeah", 2, 3}, {"B", 0, "right", 4, 5}, {"B", 1, "so", 6, 7},
                       {"B", 1, "we", 7, 8}, {"B", 1, "went", 8, 9}});
  const auto lex = BackchannelLexicon::from_corpus({s}, 1);
  CHECK(lex.size() == 1);
  CHECK(lex.contains("yeah"));
}

TEST_CASE("speaker change marks the last word as TurnTaking") {
  const auto labeled = label_session(make({{"A", 0, "how", 0, 0.2}, {"A", 0, "are", 0.2, 0.4}, {"A", 0, "you", 0.4, 0.6},
                                           {"B", 0, "good", 0.8, 1.0}}),
                                     hand_lexicon());
  REQUIRE(labeled.size() == 4);
  CHECK(labeled[2].word.text == "you");
  CHECK(labeled[2].label == TurnEvent::TurnTaking);
  CHECK(labeled[0].label == TurnEvent::ContinuingSpeech);
  CHECK(labeled[3].label == TurnEvent::ContinuingSpeech);
}

TEST_CASE("single speaker without candidates is all ContinuingSpeech") {
  const auto labeled = label_session(make({{"A", 0, "one", 0, 1}, {"A", 0, "two", 1, 2}, {"A", 1, "three", 3, 4}}),
                                     hand_lexicon());
  for (const auto& lw : labeled) CHECK(lw.label == TurnEvent::ContinuingSpeech);
}

TEST_CASE("backchannel lands on the other speaker's word with largest start not after it") {
  const auto s = make({{"A", 0, "so", 2.5, 3.0}, {"A", 0, "then", 3.0, 3.4}, {"A", 0, "we", 3.5, 3.8},
                       {"A", 0, "left", 3.8, 4.2}, {"B", 0, "yeah", 3.2, 3.4}});
  const auto labeled = label_session(s, hand_lexicon());
  // Brute-force oracle: scan every A word.
  double best = -1;
  for (const auto& w : s.words)
    if (w.speaker == "A" && w.start <= 3.2) best = std::max(best, w.start);
  CHECK(best == doctest::Approx(3.0));
  for (const auto& lw : labeled) {
    if (lw.word.start == best && lw.word.speaker == "A")
      CHECK(lw.label == TurnEvent::Backchannel);
    else
      CHECK(lw.label == TurnEvent::ContinuingSpeech);
  }
}

TEST_CASE("TurnTaking wins when a backchannel targets a turn-final word") {
  const auto s = make({{"A", 0, "done", 0.0, 0.5}, {"B", 0, "yeah", 0.2, 0.4}, {"B", 1, "my", 1.0, 1.2},
                       {"B", 1, "turn", 1.2, 1.5}});
  LabelStats st;
  const auto labeled = label_session(s, hand_lexicon(), &st);
  CHECK(labeled.front().label == TurnEvent::TurnTaking);
  CHECK(st.collisions == 1);
}

TEST_CASE("candidate before any word of the other speaker is dropped") {
  const auto s = make({{"B", 0, "yeah", 0.0, 0.2}, {"A", 0, "hello", 0.5, 0.8}, {"A", 0, "there", 0.8, 1.0}});
  LabelStats st;
  const auto labeled = label_session(s, hand_lexicon(), &st);
  CHECK(st.dropped_candidates == 1);
  CHECK(labeled.size() == 3);  // reinserted, labeled ContinuingSpeech
  for (const auto& lw : labeled) CHECK(lw.label != TurnEvent::Backchannel);
}

TEST_CASE("hand session labels match the hand derivation") {
  LabelStats st;
  const auto labeled = label_session(hand_session(), hand_lexicon(), &st);
  const auto expected = hand_labels();
  REQUIRE(labeled.size() == expected.size());
  for (const auto& lw : labeled) {
    const auto key = std::tuple(lw.word.speaker, lw.word.sentence_id, lw.word.text);
    REQUIRE(expected.count(key) == 1);
    CHECK_MESSAGE(lw.label == expected.at(key), lw.word.text);
  }
  CHECK(st.speaker_changes == 2);
  CHECK(st.backchannels == 2);
  CHECK(std::is_sorted(labeled.begin(), labeled.end(),
                       [](const LabeledWord& a, const LabeledWord& b) { return a.word.start < b.word.start; }));
}

TEST_CASE("TurnTaking count equals speaker changes in the pruned stream") {
  DialogSession s = hand_session();
  s.words = normalize_words(s.words);
  const auto ex = extract_backchannel_candidates(s, hand_lexicon());
  const auto changes = count_speaker_changes(serialize_words(ex.pruned));
  const auto labeled = serialize_and_label(ex.pruned, ex.candidates);
  const auto tt = std::count_if(labeled.begin(), labeled.end(),
                                [](const LabeledWord& lw) { return lw.label == TurnEvent::TurnTaking; });
  CHECK(static_cast<std::size_t>(tt) == changes);
  CHECK(changes == 2);
}

TEST_CASE("one sample per word with prefix tokens") {
  const auto s = make({{"A", 0, "a", 0, 1}, {"A", 0, "b", 1, 2}, {"A", 0, "c", 2, 3}, {"A", 0, "d", 3, 4},
                       {"A", 0, "e", 4, 5}, {"B", 0, "ok", 5.5, 6}});
  const auto samples = build_samples("t", label_session(s, BackchannelLexicon{}));
  REQUIRE(samples.size() == 6);
  for (int k = 0; k < 5; ++k) {
    CHECK(samples[k].tokens.size() == static_cast<std::size_t>(k + 1));
    CHECK(samples[k].tokens.back() == s.words[k].text);
    CHECK(samples[k].acoustic_ref.start == 0.0);
    CHECK(samples[k].acoustic_ref.end == s.words[k].end);
  }
  CHECK(samples[4].label == TurnEvent::TurnTaking);
  CHECK(samples[0].sample_id == "t_A0_1");
}

TEST_CASE("history holds up to two earlier sentences with relative speaker marks") {
  const auto samples = build_samples("hand", label_session(hand_session(), hand_lexicon()), 2);
  auto find = [&](const std::string& id) {
    auto it = std::find_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.sample_id == id; });
    REQUIRE(it != samples.end());
    return *it;
  };
  CHECK(find("hand_A0_3").history.empty());
  const auto b1 = find("hand_B1_2");
  // Sentences ended before 4.5s: A0 (1.5), B0 (4.3), A1 (3.9). Latest two by end: A1, B0.
  REQUIRE(b1.history.size() == 2);
  CHECK(b1.history[0].self == false);
  CHECK(b1.history[0].tokens == std::vector<std::string>{"uh-huh"});
  CHECK(b1.history[1].self == true);
  CHECK(b1.history[1].tokens.front() == "pretty");
  const auto limited = build_samples("hand", label_session(hand_session(), hand_lexicon()), 1);
  for (const auto& s : limited) CHECK(s.history.size() <= 1);
}

TEST_CASE("split sizes") {
  CHECK(split_sizes(2438) == std::array<std::size_t, 3>{2000, 300, 138});
  CHECK(split_sizes(24) == std::array<std::size_t, 3>{20, 3, 1});
  CHECK(split_sizes(3) == std::array<std::size_t, 3>{1, 1, 1});
  CHECK_THROWS_AS(split_sizes(2), Error);
  for (std::size_t n : {3, 5, 10, 24, 57, 100, 431})
    CHECK(split_sizes(n) == turnkit::testing::brute_split(n, {2000, 300, 138}));
}

TEST_CASE("split assignment is a partition") {
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back("s" + std::to_string(i));
  const auto a = split_sessions(ids);
  CHECK(a.size() == ids.size());
  std::array<std::size_t, 3> n{};
  for (const auto& [id, sp] : a) ++n[static_cast<int>(sp)];
  CHECK(n == split_sizes(50));
  CHECK_THROWS_AS(split_sessions({"x", "x", "y"}), Error);
}

TEST_CASE("downsampling target") {
  CHECK(downsample_target(56000, 86000) == 71000);
  CHECK(downsample_target(10, 20) == 15);
}

TEST_CASE("downsampling keeps the mean of the minority counts") {
  std::vector<Sample> v;
  int i = 0;
  for (int k = 0; k < 100; ++k) v.push_back(sample_with(TurnEvent::ContinuingSpeech, i++));
  for (int k = 0; k < 10; ++k) v.push_back(sample_with(TurnEvent::Backchannel, i++));
  for (int k = 0; k < 20; ++k) v.push_back(sample_with(TurnEvent::TurnTaking, i++));
  std::shuffle(v.begin(), v.end(), std::mt19937_64(3));
  const auto out = downsample_continuing(v, 7);
  CHECK(class_counts(out) == std::array<std::size_t, 3>{15, 10, 20});
  // Order of retained samples follows the input.
  std::vector<std::size_t> pos;
  for (const auto& s : out)
    pos.push_back(std::find_if(v.begin(), v.end(), [&](const Sample& x) { return x.sample_id == s.sample_id; }) -
                  v.begin());
  CHECK(std::is_sorted(pos.begin(), pos.end()));
  CHECK(downsample_continuing(v, 7).size() == out.size());
}

TEST_CASE("downsampling is a no-op at the target") {
  std::vector<Sample> v;
  for (int k = 0; k < 15; ++k) v.push_back(sample_with(TurnEvent::ContinuingSpeech, k));
  for (int k = 0; k < 10; ++k) v.push_back(sample_with(TurnEvent::Backchannel, 100 + k));
  for (int k = 0; k < 20; ++k) v.push_back(sample_with(TurnEvent::TurnTaking, 200 + k));
  const auto out = downsample_continuing(v, 1);
  REQUIRE(out.size() == v.size());
  for (std::size_t k = 0; k < v.size(); ++k) CHECK(out[k].sample_id == v[k].sample_id);
}

TEST_CASE("session and sample serialization round trip") {
  const auto s = hand_session();
  std::stringstream ss;
  write_session(ss, s);
  const auto back = read_session(ss, s.session_id);
  CHECK(back.words == s.words);

  const auto samples = build_samples("hand", label_session(s, hand_lexicon()));
  std::stringstream so;
  write_samples(so, samples);
  const auto rs = read_samples(so);
  REQUIRE(rs.size() == samples.size());
  for (std::size_t i = 0; i < rs.size(); ++i) CHECK(sample_to_json(rs[i]) == sample_to_json(samples[i]));
}

TEST_CASE("session reader validates records") {
  std::istringstream missing(R"({"speaker":"A","sentence_id":0,"word":"x","start":0})");
  CHECK_THROWS_AS(read_session(missing, "x"), Error);
  std::istringstream backwards(R"({"speaker":"A","sentence_id":0,"word":"x","start":2,"end":1})");
  CHECK_THROWS_AS(read_session(backwards, "x"), Error);
  std::istringstream three(R"({"speaker":"A","sentence_id":0,"word":"x","start":0,"end":1}
{"speaker":"B","sentence_id":0,"word":"x","start":0,"end":1}
{"speaker":"C","sentence_id":0,"word":"x","start":0,"end":1})");
  CHECK_THROWS_AS(read_session(three, "x"), Error);
}

TEST_CASE("split manifest round trip") {
  const auto a = split_sessions({"a", "b", "c", "d"});
  CHECK(parse_split_manifest(split_manifest_json(a)) == a);
}
