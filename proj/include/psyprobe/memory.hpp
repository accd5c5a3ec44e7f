#pragma once

#include <array>
#include <vector>

#include "psyprobe/gateway.hpp"

namespace psyprobe {

using SlotCueLexicon = std::array<std::vector<std::string>, kSlotCount>;

/// Cue words per slot used to decide whether a turn record carries evidence
/// for a slot. English and Korean cues.
const SlotCueLexicon& default_slot_cue_lexicon();

struct MemoryConfig {
  std::size_t history_capacity = 10;
  SlotCueLexicon slot_cues = default_slot_cue_lexicon();
};

struct MemoryState {
  std::vector<TurnRecord> turn_history;  // oldest first, at most history_capacity
  OverallSummary summary;
  int turn_index = 0;

  bool operator==(const MemoryState&) const = default;
};

Json snapshot(const MemoryState& state);
MemoryState restore(const Json& doc);

/// Appends with FIFO eviction.
void push_record(MemoryState& state, TurnRecord record, std::size_t capacity);

using SlotMask = std::array<bool, kSlotCount>;

/// A slot has evidence this turn iff it received spans or a record keyword
/// matches its cue lexicon.
SlotMask slot_evidence(const TurnRecord& record, const PppppiSpans& spans, const SlotCueLexicon& cues);

/// Slots whose proposed entry breaks the conservative update rules: a slot
/// without evidence was modified, or an evidenced slot changed without
/// evidence and without being marked inferred.
std::vector<SlotId> conservatism_violations(const PppppiAnalysis& prior, const PppppiAnalysis& proposed,
                                            const SlotMask& evidence);

/// Throws ConservatismViolation naming every offending slot.
void enforce_conservatism(const PppppiAnalysis& prior, const PppppiAnalysis& proposed, const SlotMask& evidence);

/// Engine-side bookkeeping applied after every update: slots without
/// evidence keep the prior entry, `changed` is recomputed from content,
/// provenance gains `turn_index` on change, and span-backed changes clear
/// `is_inferred`.
PppppiAnalysis finalize_update(const PppppiAnalysis& prior, const PppppiAnalysis& proposed, const PppppiSpans& spans,
                               const SlotMask& evidence, int turn_index);

struct PppppiUpdate {
  PppppiAnalysis analysis;
  std::vector<SlotId> reverted;  // slots restored after repeated violations
};

class MemoryModule {
 public:
  MemoryModule(Gateway& gateway, MemoryConfig config = {}, std::string language = "ko")
      : gateway_(gateway), config_(std::move(config)), language_(std::move(language)) {}

  const MemoryConfig& config() const { return config_; }

  TurnRecord build_turn_record(const std::string& utterance, const std::vector<DialogueTurn>& recent_turns,
                               int turn_index) const;
  PppppiUpdate update_pppppi(const PppppiAnalysis& current, const TurnRecord& record, const PppppiSpans& spans,
                             const TomState& tom, int turn_index) const;
  OverallSummary update_summary(const OverallSummary& current, const TurnRecord& record,
                                const PppppiAnalysis& analysis, const std::string& utterance, int turn_index) const;

 private:
  Gateway& gateway_;
  MemoryConfig config_;
  std::string language_;
};

}  // namespace psyprobe
