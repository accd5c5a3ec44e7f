#include <gtest/gtest.h>

#include "psyprobe/engine.hpp"
#include "test_support.hpp"

using namespace psyprobe;
using namespace psyprobe::testing;

namespace {

EngineConfig en_config() {
  EngineConfig c;
  c.language = "en";
  return c;
}

std::vector<PromptKind> issued_kinds(const Gateway& gw) {
  std::vector<PromptKind> out;
  for (const auto& e : gw.ledger()) out.push_back(e.kind);
  std::sort(out.begin(), out.end());
  return out;
}

const std::vector<std::string> kMessages = {
    "I failed my exam yesterday and I can't sleep.",
    "I always think I'm a failure and everyone will leave.",
    "My sister helps sometimes but I avoid her.",
    "Since childhood I felt I had to be perfect.",
};

}  // namespace

TEST(Engine, EachModeIssuesItsExpectedCalls) {
  for (SessionMode mode : all_session_modes()) {
    auto gw = mock_gateway();
    Engine engine(en_config(), *gw, shared_store());
    MemoryState memory;
    std::vector<DialogueTurn> history;
    for (std::size_t i = 0; i < kMessages.size(); ++i) {
      const std::size_t before = gw->ledger_size();
      TurnInput in{mode, kMessages[i], history, i == 0 ? std::optional<std::string>("Exams are crushing me.") : std::nullopt,
                   "anxious"};
      const TurnOutput out = engine.run_turn(in, memory);
      std::vector<PromptKind> kinds;
      const auto ledger = gw->ledger();
      for (std::size_t j = before; j < ledger.size(); ++j) kinds.push_back(ledger[j].kind);
      std::sort(kinds.begin(), kinds.end());
      EXPECT_EQ(kinds, expected_prompt_kinds(mode)) << to_string(mode) << " turn " << i;
      EXPECT_EQ(out.memory.turn_index, memory.turn_index + 1);
      EXPECT_LE(text::count_sentences(out.reply), kMaxDraftSentences);
      EXPECT_EQ(out.ranking.has_value(), mode != SessionMode::Baseline);
      history.push_back({"user", kMessages[i]});
      history.push_back({"agent", out.reply});
      memory = out.memory;
    }
  }
}

TEST(Engine, ExpectedCallCounts) {
  EXPECT_EQ(expected_prompt_kinds(SessionMode::Baseline).size(), 1u);
  EXPECT_EQ(expected_prompt_kinds(SessionMode::Full).size(), 12u);
  EXPECT_EQ(expected_prompt_kinds(SessionMode::WoSB).size(), 9u);
  EXPECT_EQ(expected_prompt_kinds(SessionMode::WoSP).size(), 9u);
  EXPECT_EQ(expected_prompt_kinds(SessionMode::WoQIC).size(), 10u);
}

TEST(Engine, WoSpUsesTheFixedPlan) {
  auto gw = mock_gateway();
  Engine engine(en_config(), *gw, shared_store());
  const auto out = engine.run_turn({SessionMode::WoSP, kMessages[0], {}, std::nullopt, ""}, MemoryState{});
  EXPECT_EQ(out.artifacts.at("plan"), to_json(EngineConfig::fixed_default_plan()));
  EXPECT_FALSE(out.artifacts.contains("labels"));
}

TEST(Engine, ConcernFeedsStateBuilderOnFirstTurn) {
  auto gw = mock_gateway();
  Engine engine(en_config(), *gw, shared_store());
  const auto out = engine.run_turn({SessionMode::Full, "hello", {}, std::string("I keep failing exams."), "sad"},
                                   MemoryState{});
  EXPECT_EQ(out.artifacts.at("state_source"), "I keep failing exams.");
  EXPECT_EQ(out.artifacts.at("turn_record").is_object(), true);
}

TEST(Engine, StageFailureIsAttributedAndStateUntouched) {
  const std::vector<std::pair<PromptKind, std::string>> cases = {{PromptKind::CognitiveError, "cognitive_errors"},
                                                                 {PromptKind::PppppiUpdate, "pppppi_update"},
                                                                 {PromptKind::LabelRound2, "label_prediction"},
                                                                 {PromptKind::QuestionIdeation, "question_ideation"},
                                                                 {PromptKind::Critic, "critic"}};
  for (const auto& [kind, stage] : cases) {
    auto gw = overridden_gateway([k = kind](const BackendRequest& req) -> std::optional<std::string> {
      if (req.kind == k) throw BackendUnavailable("down");
      return std::nullopt;
    });
    Engine engine(en_config(), *gw, shared_store());
    MemoryState memory;
    memory.turn_index = 2;
    memory.summary.core_narrative = "Before.";
    const MemoryState copy = memory;
    try {
      engine.run_turn({SessionMode::Full, kMessages[1], {}, std::nullopt, ""}, memory);
      FAIL() << stage;
    } catch (const StageError& e) {
      EXPECT_EQ(e.stage(), stage);
      EXPECT_EQ(e.inner_code(), "BackendUnavailable");
    }
    EXPECT_EQ(memory, copy);
  }
}

TEST(Engine, BlankMessageRejected) {
  auto gw = mock_gateway();
  Engine engine(en_config(), *gw, shared_store());
  EXPECT_THROW(engine.run_turn({SessionMode::Full, "   ", {}, std::nullopt, ""}, MemoryState{}), PreconditionViolation);
  EXPECT_EQ(gw->ledger_size(), 0u);
}

TEST(Engine, ConfigFromJson) {
  const auto c = engine_config_from_json(Json{{"gap_window", 3}, {"weights", {{"w_prov", 0.3}}}});
  EXPECT_EQ(c.gap_window, 3);
  EXPECT_DOUBLE_EQ(c.weights.w_prov, 0.3);
  EXPECT_THROW(engine_config_from_json(Json{{"gap_window", 0}}), InvalidConfig);
  EXPECT_THROW(engine_config_from_json(Json{{"weights", {{"w_content", -1}}}}), InvalidConfig);
  EXPECT_THROW(engine_config_from_json(Json::array()), InvalidConfig);
}

TEST(Engine, AskedQuestionsCollectsAgentQuestions) {
  const auto qs = asked_questions({{"user", "Why me?"}, {"agent", "That hurts. What happened?"}, {"agent", "Okay."}});
  ASSERT_EQ(qs.size(), 1u);
  EXPECT_EQ(text::trim(qs[0]), "What happened?");
}
