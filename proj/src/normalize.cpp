#include <algorithm>
#include <cctype>

#include "turnkit/corpus.hpp"

namespace turnkit {
namespace {

// Whole-token annotations for non-speech events.
const std::set<std::string> kNonSpeech = {"[silence]", "[noise]", "[laughter]", "[vocalized-noise]"};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string strip_hyphens(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && s[b] == '-') ++b;
  while (e > b && s[e - 1] == '-') --e;
  return s.substr(b, e - b);
}

std::optional<std::string> reject(const std::string& token, const std::string& why, MalformedPolicy policy,
                                  Diagnostics* diag) {
  std::string msg = "malformed annotation in token '" + token + "': " + why;
  if (policy == MalformedPolicy::Abort) throw Error(msg);
  if (diag) diag->warn(msg + " (dropped)");
  return std::nullopt;
}

std::optional<std::string> nonempty(std::string s) {
  if (s.empty()) return std::nullopt;
  return s;
}

}  // namespace

std::optional<std::string> normalize_token(const std::string& raw, MalformedPolicy policy, Diagnostics* diag) {
  const std::string token = lower(raw);
  const auto n_open = std::count(token.begin(), token.end(), '[');
  const auto n_close = std::count(token.begin(), token.end(), ']');
  if (n_open == 0 && n_close == 0) return nonempty(token);
  if (n_open != 1 || n_close != 1) return reject(raw, "unbalanced or nested brackets", policy, diag);

  const auto open = token.find('[');
  const auto close = token.find(']');
  if (close < open) return reject(raw, "closing bracket before opening bracket", policy, diag);

  const std::string inner = token.substr(open + 1, close - open - 1);
  const std::string before = token.substr(0, open);
  const std::string after = token.substr(close + 1);

  if (before.empty() && after.empty()) {
    if (kNonSpeech.count(token)) return std::nullopt;
    // [spoken/intended]
    if (const auto slash = inner.find('/'); slash != std::string::npos) {
      if (inner.find('/', slash + 1) != std::string::npos)
        return reject(raw, "more than one '/' in substitution", policy, diag);
      return nonempty(inner.substr(slash + 1));
    }
    // [laughter-word]
    if (inner.rfind("laughter-", 0) == 0) return nonempty(inner.substr(9));
    if (diag) diag->warn("unknown annotation '" + raw + "' (dropped)");
    return std::nullopt;
  }

  if (inner.find('/') != std::string::npos) return reject(raw, "substitution inside a word", policy, diag);
  // Partial word completion: pre[fix]-, pre[fix], -[pre]fix.
  return nonempty(strip_hyphens(before + inner + after));
}

std::vector<AlignedWord> normalize_words(const std::vector<AlignedWord>& raw, MalformedPolicy policy,
                                         Diagnostics* diag) {
  std::vector<AlignedWord> out;
  out.reserve(raw.size());
  for (const auto& w : raw) {
    if (auto t = normalize_token(w.text, policy, diag)) {
      AlignedWord nw = w;
      nw.text = std::move(*t);
      out.push_back(std::move(nw));
    }
  }
  return out;
}

}  // namespace turnkit
