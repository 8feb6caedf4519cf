#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "turnkit/corpus.hpp"
#include "turnkit/model/model.hpp"

namespace turnkit::testing {

// A hand-built two-speaker session with two speaker changes and two
// backchannel candidates ("uh-huh" by A, "yeah" by B). Times in seconds.
inline DialogSession hand_session() {
  DialogSession s;
  s.session_id = "hand";
  auto add = [&](const char* spk, int sid, const char* w, double a, double b) { s.words.push_back({spk, sid, w, a, b}); };
  add("A", 0, "How", 0.0, 0.3);
  add("A", 0, "are", 0.3, 0.5);
  add("A", 0, "you", 0.5, 0.8);
  add("A", 0, "doing", 0.8, 1.1);
  add("A", 0, "today", 1.1, 1.5);
  add("B", 0, "pretty", 1.7, 2.0);
  add("B", 0, "good", 2.0, 2.3);
  add("B", 0, "we", 2.3, 2.5);
  add("B", 0, "moved", 2.5, 2.9);
  add("B", 0, "to", 2.9, 3.0);
  add("B", 0, "texas", 3.0, 3.6);
  add("B", 0, "last", 3.6, 3.9);
  add("B", 0, "year", 3.9, 4.3);
  add("A", 1, "uh-huh", 3.65, 3.9);
  add("B", 1, "[laughter]", 4.35, 4.45);
  add("B", 1, "and", 4.5, 4.7);
  add("B", 1, "it", 4.7, 4.8);
  add("B", 1, "is", 4.8, 5.0);
  add("B", 1, "hot", 5.0, 5.4);
  add("A", 2, "that", 5.6, 5.8);
  add("A", 2, "sounds", 5.8, 6.1);
  add("A", 2, "hot", 6.1, 6.5);
  add("B", 2, "yeah", 6.0, 6.2);
  return s;
}

inline BackchannelLexicon hand_lexicon() { return BackchannelLexicon({"uh-huh", "yeah", "oh okay"}); }

// Labels derived by hand: "today" and B's "hot" end turns; "last" receives
// A's uh-huh (start 3.65 >= 3.6) and "sounds" receives B's yeah (6.0 >= 5.8).
// Keyed by (speaker, sentence, word).
inline std::map<std::tuple<std::string, int, std::string>, TurnEvent> hand_labels() {
  using E = TurnEvent;
  std::map<std::tuple<std::string, int, std::string>, E> m;
  for (const char* w : {"how", "are", "you", "doing"}) m[{"A", 0, w}] = E::ContinuingSpeech;
  m[{"A", 0, "today"}] = E::TurnTaking;
  for (const char* w : {"pretty", "good", "we", "moved", "to", "texas", "year"}) m[{"B", 0, w}] = E::ContinuingSpeech;
  m[{"B", 0, "last"}] = E::Backchannel;
  m[{"A", 1, "uh-huh"}] = E::ContinuingSpeech;
  for (const char* w : {"and", "it", "is"}) m[{"B", 1, w}] = E::ContinuingSpeech;
  m[{"B", 1, "hot"}] = E::TurnTaking;
  m[{"A", 2, "that"}] = E::ContinuingSpeech;
  m[{"A", 2, "sounds"}] = E::Backchannel;
  m[{"A", 2, "hot"}] = E::ContinuingSpeech;
  m[{"B", 2, "yeah"}] = E::ContinuingSpeech;
  return m;
}

// Pairwise Mann-Whitney statistic; ties count one half.
inline double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * neg.size());
}

// Largest-remainder apportionment with every part at least one.
inline std::array<std::size_t, 3> brute_split(std::size_t n, std::array<double, 3> ratio) {
  const double total = ratio[0] + ratio[1] + ratio[2];
  std::array<std::size_t, 3> best{};
  double best_err = 1e300;
  // Exhaustive search over all compositions: minimise distance to the quota
  // vector, which the largest-remainder rule achieves.
  for (std::size_t a = 1; a + 2 <= n; ++a)
    for (std::size_t b = 1; a + b + 1 <= n; ++b) {
      const std::size_t c = n - a - b;
      const std::array<std::size_t, 3> x{a, b, c};
      double err = 0.0;
      for (int i = 0; i < 3; ++i) err += std::abs(static_cast<double>(x[i]) - n * ratio[i] / total);
      if (err < best_err - 1e-12) {
        best_err = err;
        best = x;
      }
    }
  return best;
}

inline ModelConfig toy_config(int vocab_size, std::uint64_t seed = 0) {
  ModelConfig c;
  c.frame_dim = 3;
  c.backbone_dim = 4;
  c.proj_dim = 4;
  c.vocab_size = vocab_size;
  c.embed_dim = 8;
  c.layers = 1;
  c.heads = 2;
  c.ff_dim = 16;
  c.max_len = 16;
  c.seed = seed;
  return c;
}

struct GradCheck {
  double worst = 0.0;  // largest |analytic - numeric| / (atol + rtol * max(|a|,|n|)) ratio
  std::string worst_path;
  std::size_t checked = 0;
};

// Compares accumulated analytic gradients of every visited parameter (where
// `want(path)` holds) against central differences of `loss`.
inline GradCheck check_gradients(TurnModel<double>& model, const std::function<double(bool)>& loss,
                                 const std::function<bool(const std::string&)>& want, double rtol = 1e-3,
                                 double atol = 1e-7, double h = 1e-6) {
  model.zero_grad();
  loss(true);
  std::map<std::string, Matrix<double>> analytic;
  model.visit([&](const std::string& path, const Parameter<double>& p) { analytic[path] = p.grad; });

  GradCheck out;
  std::vector<std::pair<std::string, Parameter<double>*>> params;
  model.visit([&](const std::string& path, Parameter<double>& p) { params.emplace_back(path, &p); });
  for (auto& [path, p] : params) {
    if (!want(path)) continue;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double x0 = x;
      x = x0 + h;
      const double up = loss(false);
      x = x0 - h;
      const double down = loss(false);
      x = x0;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[path].data()[i];
      const double ratio = std::abs(a - numeric) / (atol + rtol * std::max(std::abs(a), std::abs(numeric)));
      if (ratio > out.worst) {
        out.worst = ratio;
        out.worst_path = path;
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace turnkit::testing
