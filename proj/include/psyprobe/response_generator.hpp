#pragma once

#include <array>
#include <vector>

#include "psyprobe/gateway.hpp"

namespace psyprobe {

struct GapWeights {
  double w_content = 0.40;
  double w_evidence = 0.45;
  double w_prov = 0.20;
  double w_recency = 0.15;

  void validate() const;
};

struct GapFeatures {
  bool f_content = false;   // slot text missing
  bool f_evidence = false;  // no evidence, or inferred
  bool f_prov = false;      // no supporting turn inside the window
  bool f_recency = false;   // not updated this turn

  std::array<int, 4> as_array() const { return {f_content, f_evidence, f_prov, f_recency}; }
  bool operator==(const GapFeatures&) const = default;
};

struct GapEntry {
  SlotId slot = SlotId::Presenting;
  double score = 0.0;
  GapFeatures features;
  bool operator==(const GapEntry&) const = default;
};

struct GapRanking {
  std::vector<GapEntry> entries;  // descending score, canonical tie-break
  bool operator==(const GapRanking&) const = default;
};

Json to_json(const GapFeatures& f);
Json to_json(const GapRanking& r);
GapRanking gap_ranking_from_json(const Json& doc);

GapFeatures gap_features(const PppppiEntry& entry, int turn_index, int window = 4);
double gap_score(const GapFeatures& f, const GapWeights& w = {});
GapRanking rank_gaps(const PppppiAnalysis& analysis, int turn_index, const GapWeights& w = {}, int window = 4);

struct IdeationConfig {
  std::size_t k = 3;
  double tau_protective = 0.8;
  std::vector<std::string> readiness_cues = {"help", "support", "friend", "family", "strength", "strengths", "cope",
                                             "coping", "resources", "도움", "친구", "가족", "강점", "버티"};
};

/// Top-k slots, with Protective dropped unless its score reaches tau or the
/// latest utterance contains a readiness cue.
std::vector<GapEntry> ideation_slots(const GapRanking& ranking, const std::string& latest_utterance,
                                     const IdeationConfig& config);

class ResponseGenerator {
 public:
  ResponseGenerator(Gateway& gateway, IdeationConfig config = {}, std::string language = "ko")
      : gateway_(gateway), config_(std::move(config)), language_(std::move(language)) {}

  const IdeationConfig& config() const { return config_; }

  /// Candidates for eligible slots only, ordered by gap score then
  /// confidence (both descending, stable).
  std::vector<CandidateQuestion> ideate_questions(const GapRanking& ranking, const PppppiAnalysis& analysis,
                                                  const std::vector<DialogueTurn>& recent_turns,
                                                  const std::vector<std::string>& keywords,
                                                  const std::vector<std::string>& asked_questions,
                                                  int turn_index = 0) const;

  /// At most four sentences; one regeneration, then LengthViolation. With an
  /// Open Question act and a non-empty pool, the draft must quote a candidate.
  std::string generate_draft(const StrategyPlan& plan, const std::string& utterance,
                             const std::vector<CandidateQuestion>& candidates, const OverallSummary& memory,
                             const std::vector<TurnRecord>& recent_records, int turn_index = 0) const;

  CriticDecision critique(const std::string& draft, const std::vector<std::string>& recent_agent_turns,
                          const std::string& narrative, const GapRanking& ranking,
                          const std::vector<CandidateQuestion>& candidates, int turn_index = 0) const;

 private:
  Gateway& gateway_;
  IdeationConfig config_;
  std::string language_;
};

inline constexpr std::size_t kMaxDraftSentences = 4;

/// Applies the critic's question operation. Only question sentences are
/// touched. For add/replace the highest-confidence pool candidate for the
/// decision's slot wins (pool order breaks ties; for replace the question
/// being replaced is skipped), then the inline text. Throws
/// NoCandidateForSlot when neither exists.
std::string apply_ops(const std::string& draft, const CriticDecision& decision,
                      const std::vector<CandidateQuestion>& candidates);

}  // namespace psyprobe
