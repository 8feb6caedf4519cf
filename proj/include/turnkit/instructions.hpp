#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "turnkit/corpus.hpp"

namespace turnkit {

// Index of a task instruction; equal to the TurnEvent encoding it targets.
class InstructionIndex {
 public:
  explicit InstructionIndex(int s);
  explicit InstructionIndex(TurnEvent e) : s_(to_int(e)) {}
  int value() const { return s_; }
  TurnEvent target() const { return static_cast<TurnEvent>(s_); }
  bool operator==(const InstructionIndex&) const = default;
  auto operator<=>(const InstructionIndex&) const = default;

 private:
  int s_;
};

struct InstructionedSample {
  InstructionIndex s{0};
  std::string text;
  int binary_label = 0;
  std::string origin_sample_id;
};

// The fixed natural-language instruction for task s.
const std::string& instruction_text(InstructionIndex s);
const std::string& instruction_text(int s);

// Instruction + (optional) speaker-marked history + target:
//   "<instruction>: <spkOther> right. <spkSelf> we moved. <spkSelf> and then."
// The instruction's own closing period is replaced by the colon.
std::string compose_with_history(InstructionIndex s, const std::vector<HistoryEntry>& history,
                                 const Sample& target);

// Same layout without an instruction prefix; used for three-way models
// trained with dialogue history.
std::string compose_context(const std::vector<HistoryEntry>& history, const Sample& target);

struct AugmentOptions {
  bool use_history = false;
};

// Each sample is repeated once per instruction; binary label is 1 iff the
// instruction targets the sample's class.
std::map<InstructionIndex, std::vector<InstructionedSample>> augment(const std::vector<Sample>& batch,
                                                                     const AugmentOptions& opts = {});

void write_augmented(std::ostream& out, const std::map<InstructionIndex, std::vector<InstructionedSample>>& aug);

}  // namespace turnkit
