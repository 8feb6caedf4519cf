#include "turnkit/instructions.hpp"

#include <ostream>

#include <json.hpp>

namespace turnkit {

InstructionIndex::InstructionIndex(int s) : s_(s) {
  if (s < 0 || s >= kNumClasses) throw Error("instruction index out of range: " + std::to_string(s));
}

namespace {

const std::array<std::string, 3> kInstructions = {
    "Identify if the current speaker will continue to speak at the end of the sentence.",
    "Identify if another speaker will backchannel at the end of the sentence.",
    "Identify if another speaker will take the turn at the end of the sentence.",
};

void append_utterance(std::string& out, bool self, const std::vector<std::string>& tokens) {
  out += ' ';
  out += self ? kSelfMark : kOtherMark;
  for (const auto& t : tokens) {
    out += ' ';
    out += t;
  }
  out += '.';
}

}  // namespace

const std::string& instruction_text(InstructionIndex s) { return kInstructions[s.value()]; }

const std::string& instruction_text(int s) { return instruction_text(InstructionIndex(s)); }

std::string compose_context(const std::vector<HistoryEntry>& history, const Sample& target) {
  std::string out;
  for (const auto& h : history) append_utterance(out, h.self, h.tokens);
  append_utterance(out, true, target.tokens);
  return out.substr(1);
}

std::string compose_with_history(InstructionIndex s, const std::vector<HistoryEntry>& history,
                                 const Sample& target) {
  std::string head = instruction_text(s);
  if (!head.empty() && head.back() == '.') head.pop_back();
  return head + ": " + compose_context(history, target);
}

std::map<InstructionIndex, std::vector<InstructionedSample>> augment(const std::vector<Sample>& batch,
                                                                     const AugmentOptions& opts) {
  if (batch.empty()) throw Error("augment: empty batch");
  std::map<InstructionIndex, std::vector<InstructionedSample>> out;
  for (int k = 0; k < kNumClasses; ++k) {
    const InstructionIndex s(k);
    auto& list = out[s];
    list.reserve(batch.size());
    for (const auto& x : batch) {
      static const std::vector<HistoryEntry> kNone;
      InstructionedSample a;
      a.s = s;
      a.text = compose_with_history(s, opts.use_history ? x.history : kNone, x);
      a.binary_label = to_int(x.label) == k ? 1 : 0;
      a.origin_sample_id = x.sample_id;
      list.push_back(std::move(a));
    }
  }
  return out;
}

void write_augmented(std::ostream& out, const std::map<InstructionIndex, std::vector<InstructionedSample>>& aug) {
  for (const auto& [s, list] : aug)
    for (const auto& a : list) {
      nlohmann::json j = {{"s", a.s.value()},
                          {"text", a.text},
                          {"binary_label", a.binary_label},
                          {"origin_sample_id", a.origin_sample_id}};
      out << j.dump() << '\n';
    }
}

}  // namespace turnkit
