#include "turnkit/model/tokenizer.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "turnkit/corpus.hpp"
#include "turnkit/error.hpp"
#include "turnkit/instructions.hpp"

namespace turnkit {

namespace {
bool is_split_punct(char c) { return c == '.' || c == ':' || c == ',' || c == '?' || c == '!' || c == ';'; }
}  // namespace

std::vector<std::string> Vocabulary::tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string piece; in >> piece;) {
    std::vector<std::string> tail;
    while (piece.size() > 1 && is_split_punct(piece.back())) {
      tail.emplace_back(1, piece.back());
      piece.pop_back();
    }
    out.push_back(piece);
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

Vocabulary::Vocabulary() {
  add(kUnknown);
  add(kSelfMark);
  add(kOtherMark);
  for (const char* p : {".", ":", ",", "?", "!", ";"}) add(p);
  for (int s = 0; s < kNumClasses; ++s)
    for (const auto& t : tokenize(instruction_text(s))) add(t);
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  if (tokens.empty() || tokens.front() != kUnknown) throw Error("vocabulary must start with " + std::string(kUnknown));
  for (const auto& t : tokens) {
    if (index_.count(t)) throw Error("duplicate vocabulary token: " + t);
    add(t);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
  Vocabulary v;
  std::set<std::string> seen;
  for (const auto& t : texts)
    for (auto& tok : tokenize(t)) seen.insert(std::move(tok));
  for (const auto& tok : seen)
    if (!v.contains(tok)) v.add(tok);
  return v;
}

void Vocabulary::add(const std::string& token) {
  if (index_.emplace(token, static_cast<int>(tokens_.size())).second) tokens_.push_back(token);
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unknown_id() : it->second;
}

std::vector<int> Vocabulary::encode(const std::string& text) const {
  std::vector<int> ids;
  for (const auto& t : tokenize(text)) ids.push_back(id(t));
  return ids;
}

}  // namespace turnkit
