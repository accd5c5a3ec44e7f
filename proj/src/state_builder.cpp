#include "psyprobe/state_builder.hpp"

namespace psyprobe {

std::vector<DialogueTurn> tail(const std::vector<DialogueTurn>& turns, std::size_t n) {
  const std::size_t start = turns.size() > n ? turns.size() - n : 0;
  return {turns.begin() + static_cast<std::ptrdiff_t>(start), turns.end()};
}

CognitiveErrorReport StateBuilder::extract_cognitive_errors(const std::string& utterance, int turn_index) const {
  if (text::is_blank(utterance)) throw PreconditionViolation("cognitive error extraction needs a non-empty utterance");
  Contract<CognitiveErrorReport> contract;
  contract.check = [&](const CognitiveErrorReport& r) { check_grounded(r, utterance); };
  return gateway_.complete<CognitiveErrorReport>(
      {PromptKind::CognitiveError, {{"utterance", utterance}, {"language", language_}}, turn_index}, contract);
}

PppppiSpans StateBuilder::align_pppppi(const std::string& utterance, const CognitiveErrorReport& flags,
                                       int turn_index) const {
  if (text::is_blank(utterance)) throw PreconditionViolation("PPPPPI alignment needs a non-empty utterance");
  Contract<PppppiSpans> contract;
  contract.check = [&](const PppppiSpans& s) { check_grounded(s, utterance); };
  return gateway_.complete<PppppiSpans>(
      {PromptKind::PppppiAlign,
       {{"utterance", utterance}, {"cognitive_errors", to_json(flags)}, {"language", language_}},
       turn_index},
      contract);
}

TomState StateBuilder::infer_tom(const std::vector<DialogueTurn>& recent_turns, const PppppiSpans& spans,
                                 int turn_index) const {
  if (recent_turns.empty() || recent_turns.back().speaker != "user")
    throw PreconditionViolation("ToM reasoning needs recent turns ending with a user turn");
  return gateway_.complete<TomState>({PromptKind::Tom,
                                      {{"recent_turns", to_json(tail(recent_turns, tom_window_))},
                                       {"pppppi_spans", to_json(spans)},
                                       {"language", language_}},
                                      turn_index});
}

}  // namespace psyprobe
