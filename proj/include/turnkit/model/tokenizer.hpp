#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace turnkit {

// Word-level vocabulary. Whitespace splits tokens; trailing ". : , ? ! ;"
// are split off as separate tokens. Unknown words map to "<unk>".
class Vocabulary {
 public:
  static constexpr const char* kUnknown = "<unk>";

  // Reserved tokens: <unk>, speaker marks, punctuation, and the words of the
  // task instructions.
  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  static std::vector<std::string> tokenize(const std::string& text);
  static Vocabulary build(const std::vector<std::string>& texts);

  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  std::vector<int> encode(const std::string& text) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  int unknown_id() const { return 0; }

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace turnkit
