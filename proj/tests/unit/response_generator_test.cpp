#include <gtest/gtest.h>

#include <random>

#include "psyprobe/engine.hpp"
#include "psyprobe/response_generator.hpp"
#include "test_support.hpp"

using namespace psyprobe;
using namespace psyprobe::testing;

namespace {

double oracle_score(bool c, bool e, bool p, bool r) {
  const double raw = (c ? 0.40 : 0.0) + (e ? 0.45 : 0.0) + (p ? 0.20 : 0.0) + (r ? 0.15 : 0.0);
  return raw > 1.0 ? 1.0 : raw;
}

PppppiEntry entry_for(bool c, bool e, bool p, bool r, int ti) {
  PppppiEntry x;
  x.text = c ? "" : "known";
  if (!e) x.evidence = {"quote"};
  if (!p) x.provenance = {ti};
  x.changed = !r;
  return x;
}

std::vector<std::string> sentences_of(const std::string& s, bool questions) {
  std::vector<std::string> out;
  for (const auto& sp : text::split_sentences(s))
    if (sp.question == questions) out.emplace_back(text::trim(sp.view(s)));
  return out;
}

CandidateQuestion cand(SlotId s, const std::string& q, double conf) { return {s, "intent", q, "why", conf}; }

}  // namespace

TEST(GapScore, AllSixteenFeatureVectors) {
  for (int mask = 0; mask < 16; ++mask) {
    const bool c = mask & 1, e = mask & 2, p = mask & 4, r = mask & 8;
    const GapFeatures f = gap_features(entry_for(c, e, p, r, 5), 5);
    EXPECT_EQ(f.f_content, c);
    EXPECT_EQ(f.f_evidence, e);
    EXPECT_EQ(f.f_prov, p);
    EXPECT_EQ(f.f_recency, r);
    EXPECT_NEAR(gap_score(f), oracle_score(c, e, p, r), 1e-12) << mask;
  }
  EXPECT_DOUBLE_EQ(gap_score({true, true, true, true}), 1.0);
  EXPECT_DOUBLE_EQ(gap_score({false, false, false, false}), 0.0);
}

TEST(GapScore, ProvenanceWindowAndInference) {
  PppppiEntry e;
  e.provenance = {2};
  EXPECT_FALSE(gap_features(e, 5, 4).f_prov);
  EXPECT_TRUE(gap_features(e, 6, 4).f_prov);
  EXPECT_TRUE(gap_features(e, 1, 4).f_prov);
  e.evidence = {"q"};
  e.is_inferred = true;
  EXPECT_TRUE(gap_features(e, 5).f_evidence);
  EXPECT_THROW(gap_features(e, 5, 0), PreconditionViolation);
}

TEST(GapRanking, SortedStableAndComplete) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int ti = std::uniform_int_distribution<int>(0, 8)(rng);
    const auto a = random_analysis(rng, ti);
    const auto r = rank_gaps(a, ti);
    ASSERT_EQ(r.entries.size(), 6u);
    for (std::size_t i = 0; i + 1 < r.entries.size(); ++i) {
      EXPECT_GE(r.entries[i].score, r.entries[i + 1].score);
      if (r.entries[i].score == r.entries[i + 1].score)
        EXPECT_LT(slot_index(r.entries[i].slot), slot_index(r.entries[i + 1].slot));
    }
    for (const auto& e : r.entries) {
      EXPECT_NEAR(e.score, gap_score(gap_features(a[e.slot], ti)), 1e-12);
      EXPECT_GE(e.score, 0.0);
      EXPECT_LE(e.score, 1.0);
    }
  }
}

TEST(GapRanking, JsonRoundTrip) {
  std::mt19937_64 rng(3);
  const auto r = rank_gaps(random_analysis(rng, 4), 4);
  const auto back = gap_ranking_from_json(to_json(r));
  ASSERT_EQ(back.entries.size(), r.entries.size());
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].slot, r.entries[i].slot);
    EXPECT_EQ(back.entries[i].features, r.entries[i].features);
  }
}

TEST(Ideation, ProtectiveNeedsScoreOrReadiness) {
  GapRanking r;
  r.entries = {{SlotId::Protective, 0.6, {}}, {SlotId::Impact, 0.5, {}}, {SlotId::Presenting, 0.4, {}},
               {SlotId::Precipitating, 0.3, {}}};
  IdeationConfig cfg;
  auto slots = ideation_slots(r, "I feel bad", cfg);
  ASSERT_EQ(slots.size(), 2u);
  EXPECT_EQ(slots[0].slot, SlotId::Impact);
  slots = ideation_slots(r, "my friend tries to help", cfg);
  EXPECT_EQ(slots.front().slot, SlotId::Protective);
  r.entries[0].score = 0.85;
  EXPECT_EQ(ideation_slots(r, "x", cfg).size(), 3u);
  cfg.k = 0;
  EXPECT_THROW(ideation_slots(r, "x", cfg), PreconditionViolation);
}

TEST(Ideation, DropsIneligibleAndOrdersCandidates) {
  auto gw = scripted_gateway([](const BackendRequest&) {
    CandidateList l;
    l.candidates = {cand(SlotId::Presenting, "What is hardest?", 0.9), cand(SlotId::Impact, "How is sleep?", 0.4),
                    cand(SlotId::Impact, "How is work?", 0.8), cand(SlotId::Predisposing, "Since when?", 0.99)};
    return to_json(l).dump();
  });
  ResponseGenerator rg(*gw, {}, "en");
  GapRanking r;
  r.entries = {{SlotId::Impact, 0.9, {}}, {SlotId::Presenting, 0.5, {}}, {SlotId::Protective, 0.4, {}},
               {SlotId::Predisposing, 0.3, {}}};
  const auto out = rg.ideate_questions(r, PppppiAnalysis{}, {{"user", "hi"}}, {}, {});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].question, "How is work?");
  EXPECT_EQ(out[1].question, "How is sleep?");
  EXPECT_EQ(out[2].slot, SlotId::Presenting);
}

TEST(ApplyOps, Properties) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> plain = {"That sounds hard.", "You have carried a lot.", "I hear the worry."};
  const std::vector<std::string> qs = {"What happened next?", "How did that feel?", "Who helps you?"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> parts;
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n; ++i) parts.push_back(std::bernoulli_distribution(0.35)(rng) ? pick(rng, qs) : pick(rng, plain));
    std::string draft;
    for (const auto& p : parts) draft += (draft.empty() ? "" : " ") + p;
    const auto statements = sentences_of(draft, false);
    const auto questions = sentences_of(draft, true);

    std::vector<CandidateQuestion> pool = {cand(SlotId::Impact, "How is your sleep lately?", 0.5),
                                           cand(SlotId::Impact, "What changed at work?", 0.7),
                                           cand(SlotId::Presenting, "What weighs on you most?", 0.6)};
    CriticDecision d;
    d.question_op.action = static_cast<QuestionAction>(std::uniform_int_distribution<int>(0, 3)(rng));
    d.question_op.slot = SlotId::Impact;
    const std::string out = apply_ops(draft, d, pool);
    EXPECT_EQ(sentences_of(out, false), statements) << draft;
    const auto out_q = sentences_of(out, true);
    switch (d.question_op.action) {
      case QuestionAction::Keep:
        EXPECT_EQ(out, draft);
        break;
      case QuestionAction::Remove:
        EXPECT_TRUE(out_q.empty());
        break;
      case QuestionAction::Add:
        ASSERT_EQ(out_q.size(), questions.size() + 1);
        EXPECT_EQ(out_q.back(), "What changed at work?");
        break;
      case QuestionAction::Replace:
        ASSERT_EQ(out_q.size(), 1u);
        EXPECT_EQ(out_q.front(), "What changed at work?");
        break;
    }
  }
}

TEST(ApplyOps, InlineFallbackAndMissingCandidate) {
  CriticDecision d;
  d.question_op.action = QuestionAction::Add;
  d.question_op.slot = SlotId::Protective;
  d.question_op.text = "Who stands by you?";
  EXPECT_EQ(apply_ops("That is hard.", d, {}), "That is hard. Who stands by you?");
  d.question_op.text.reset();
  EXPECT_THROW(apply_ops("That is hard.", d, {}), NoCandidateForSlot);
  d.question_op.action = QuestionAction::Replace;
  d.question_op.slot = SlotId::Impact;
  const std::vector<CandidateQuestion> pool = {cand(SlotId::Impact, "How is sleep?", 0.9),
                                               cand(SlotId::Impact, "How is work?", 0.1)};
  EXPECT_EQ(apply_ops("Okay. How is sleep?", d, pool), "Okay. How is work?");
}

TEST(Draft, LengthIsRegeneratedOnceThenRejected) {
  int calls = 0;
  auto gw = scripted_gateway([&](const BackendRequest& req) {
    ++calls;
    EXPECT_EQ(req.vars.at("length_feedback").get<std::string>().empty(), calls == 1);
    return std::string("One. Two. Three. Four. Five.");
  });
  ResponseGenerator rg(*gw, {}, "en");
  EXPECT_THROW(rg.generate_draft(EngineConfig::fixed_default_plan(), "hi", {}, OverallSummary{}, {}), LengthViolation);
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(gw->ledger_size(), 2u);

  int n = 0;
  auto gw2 = scripted_gateway([&](const BackendRequest&) {
    return std::string(++n == 1 ? "One. Two. Three. Four. Five." : "Short now.");
  });
  ResponseGenerator rg2(*gw2, {}, "en");
  EXPECT_EQ(rg2.generate_draft(EngineConfig::fixed_default_plan(), "hi", {}, OverallSummary{}, {}), "Short now.");
}

TEST(Draft, OpenQuestionMustComeFromPool) {
  int calls = 0;
  auto gw = scripted_gateway([&](const BackendRequest&) {
    ++calls;
    return std::string(calls < 3 ? "That is hard. What else?" : "That is hard. How is sleep?");
  });
  ResponseGenerator rg(*gw, {}, "en");
  const std::vector<CandidateQuestion> pool = {cand(SlotId::Impact, "How is sleep?", 0.5)};
  EXPECT_EQ(rg.generate_draft(EngineConfig::fixed_default_plan(), "hi", pool, OverallSummary{}, {}),
            "That is hard. How is sleep?");
  EXPECT_EQ(gw->ledger().back().attempts, 3);
}
