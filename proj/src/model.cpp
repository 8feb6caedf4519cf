#include "turnkit/model/model.hpp"

namespace turnkit {

const char* fusion_name(FusionOption f) {
  switch (f) {
    case FusionOption::AcousticOnly: return "acoustic";
    case FusionOption::TextOnly: return "text";
    case FusionOption::FusionOpt1: return "opt1";
    case FusionOption::FusionOpt2: return "opt2";
  }
  return "?";
}

FusionOption fusion_from_name(const std::string& s) {
  if (s == "acoustic") return FusionOption::AcousticOnly;
  if (s == "text") return FusionOption::TextOnly;
  if (s == "opt1") return FusionOption::FusionOpt1;
  if (s == "opt2") return FusionOption::FusionOpt2;
  throw Error("unknown fusion mode '" + s + "' (expected acoustic|text|opt1|opt2)");
}

const char* head_name(HeadKind h) { return h == HeadKind::ThreeWay ? "three_way" : "multitask"; }

HeadKind head_from_name(const std::string& s) {
  if (s == "three_way") return HeadKind::ThreeWay;
  if (s == "multitask") return HeadKind::MultiTaskBinary;
  throw Error("unknown head kind '" + s + "' (expected three_way|multitask)");
}

}  // namespace turnkit
