#pragma once

#include <optional>
#include <vector>

#include "psyprobe/memory.hpp"
#include "psyprobe/response_generator.hpp"
#include "psyprobe/state_builder.hpp"
#include "psyprobe/strategy_planner.hpp"

namespace psyprobe {

struct EngineConfig {
  std::string language = "ko";
  std::size_t tom_window = 6;
  std::size_t recent_records = 3;
  std::size_t fewshot_k = 3;
  int gap_window = 4;
  GapWeights weights;
  IdeationConfig ideation;
  MemoryConfig memory;
  StrategyPlan default_plan = fixed_default_plan();

  /// Complex Reflection followed by Open Question.
  static StrategyPlan fixed_default_plan();
  void validate() const;
};

EngineConfig engine_config_from_json(const Json& doc, EngineConfig base = {});

/// PromptKinds one turn issues in each mode, as a sorted multiset. Draft
/// regeneration adds a second Draft entry.
std::vector<PromptKind> expected_prompt_kinds(SessionMode mode);

/// Context for one user turn. `history` holds the dialogue before this turn.
struct TurnInput {
  SessionMode mode = SessionMode::Full;
  std::string utterance;
  std::vector<DialogueTurn> history;
  /// Set on the first turn: state-builder stages read this text instead of
  /// the message.
  std::optional<std::string> concern;
  std::string emotion;
};

struct TurnOutput {
  std::string reply;
  MemoryState memory;  // state after the turn; the input state is untouched
  std::optional<GapRanking> ranking;
  Json artifacts = Json::object();
};

/// Runs the per-turn pipeline over a borrowed gateway. Never mutates the
/// memory it is given, so a failed stage leaves the caller's state intact.
class Engine {
 public:
  Engine(EngineConfig config, Gateway& gateway, std::vector<FewShotExample> store);

  const EngineConfig& config() const { return config_; }

  /// Stage failures are rethrown as StageError naming the stage.
  TurnOutput run_turn(const TurnInput& input, const MemoryState& memory) const;

 private:
  TurnOutput run_baseline(const TurnInput& input, const MemoryState& memory) const;

  EngineConfig config_;
  Gateway& gateway_;
  std::vector<FewShotExample> store_;
  StateBuilder state_builder_;
  MemoryModule memory_;
  StrategyPlanner planner_;
  ResponseGenerator responder_;
};

/// Question sentences of every agent turn in `history`, oldest first.
std::vector<std::string> asked_questions(const std::vector<DialogueTurn>& history);

}  // namespace psyprobe
