#pragma once

#include <vector>

#include "psyprobe/gateway.hpp"

namespace psyprobe {

/// Cognitive errors, PPPPPI spans and ToM state for one user turn. Reads no
/// session memory; every output span is checked against the source text.
class StateBuilder {
 public:
  explicit StateBuilder(Gateway& gateway, std::string language = "ko", std::size_t tom_window = 6)
      : gateway_(gateway), language_(std::move(language)), tom_window_(tom_window) {}

  CognitiveErrorReport extract_cognitive_errors(const std::string& utterance, int turn_index = 0) const;
  PppppiSpans align_pppppi(const std::string& utterance, const CognitiveErrorReport& flags, int turn_index = 0) const;
  /// Uses the last `tom_window` turns of `recent_turns`, which must end with
  /// a user turn.
  TomState infer_tom(const std::vector<DialogueTurn>& recent_turns, const PppppiSpans& spans,
                     int turn_index = 0) const;

  std::size_t tom_window() const { return tom_window_; }

 private:
  Gateway& gateway_;
  std::string language_;
  std::size_t tom_window_;
};

/// Last `n` entries of `turns`.
std::vector<DialogueTurn> tail(const std::vector<DialogueTurn>& turns, std::size_t n);

}  // namespace psyprobe
