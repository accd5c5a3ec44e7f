#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include "../unit/metric_oracle.hpp"
#include "../unit/test_support.hpp"
#include "psyprobe/engine.hpp"
#include "psyprobe/eval.hpp"
#include "psyprobe/memory.hpp"
#include "psyprobe/response_generator.hpp"
#include "psyprobe/state_builder.hpp"

using namespace psyprobe;
using namespace psyprobe::testing;

namespace {

constexpr double kGapTolerance = 1e-12;
constexpr double kMetricTolerance = 1e-9;

/// Collects the first few failed expectations of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (messages_.size() < 5) messages_.push_back(what);
  }
  void note(const std::string& n) { notes_.push_back(n); }
  bool ok() const { return failures_ == 0; }
  std::string detail() const {
    std::ostringstream os;
    for (const auto& n : notes_) os << "; " << n;
    if (failures_ > 0) {
      os << "; " << failures_ << " failed expectation(s)";
      for (const auto& m : messages_) os << "; " << m;
    }
    return os.str();
  }

 private:
  int failures_ = 0;
  std::vector<std::string> messages_;
  std::vector<std::string> notes_;
};

struct Criterion {
  std::string name;
  std::chrono::milliseconds budget;
  std::function<void(Check&)> body;
};

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

void gap_scorer(Check& c) {
  const double w[4] = {0.40, 0.45, 0.20, 0.15};
  for (int mask = 0; mask < 16; ++mask) {
    double raw = 0.0;
    for (int b = 0; b < 4; ++b)
      if (mask & (1 << b)) raw += w[b];
    const double expected = raw > 1.0 ? 1.0 : raw;
    const GapFeatures f{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0};
    const double got = gap_score(f);
    c.expect(std::abs(got - expected) <= kGapTolerance,
             "vector " + std::to_string(mask) + " scored " + num(got) + " expected " + num(expected));
  }
  c.expect(gap_score({true, true, true, true}) == 1.0, "(1,1,1,1) is not clipped to 1.0");
}

void ranking(Check& c) {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 1000; ++trial) {
    const int ti = std::uniform_int_distribution<int>(0, 12)(rng);
    const auto analysis = random_analysis(rng, ti);
    const auto r = rank_gaps(analysis, ti);
    std::array<int, 6> seen{};
    for (const auto& e : r.entries) ++seen[slot_index(e.slot)];
    c.expect(r.entries.size() == 6 && std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }),
             "trial " + std::to_string(trial) + " is not a permutation of the six slots");
    for (std::size_t i = 0; i + 1 < r.entries.size(); ++i) {
      const auto& a = r.entries[i];
      const auto& b = r.entries[i + 1];
      c.expect(a.score >= b.score, "trial " + std::to_string(trial) + " increases at " + std::to_string(i));
      if (a.score == b.score)
        c.expect(slot_index(a.slot) < slot_index(b.slot), "trial " + std::to_string(trial) + " breaks a tie out of order");
    }
  }
}

void exclusion(Check& c) {
  using L = MiLabel;
  const std::vector<std::pair<L, std::vector<L>>> table = {
      {L::OpenQuestion, {L::OpenQuestion, L::ClosedQuestion}},
      {L::ClosedQuestion, {L::OpenQuestion, L::ClosedQuestion}},
      {L::SimpleReflection, {L::SimpleReflection, L::ComplexReflection}},
      {L::ComplexReflection, {L::SimpleReflection, L::ComplexReflection}},
      {L::Affirm, {L::Affirm}},
      {L::GiveInformation, {L::GiveInformation}},
      {L::Advise, {L::Advise}},
      {L::General, {L::General}},
  };
  for (const auto& [first, expected] : table) {
    auto got = exclusion_set(first);
    auto want = expected;
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    c.expect(got == want, "exclusion set for " + to_string(first));

    for (L proposed : expected) {
      std::vector<std::string> shown;
      auto gw = scripted_gateway([&, first = first, proposed](const BackendRequest& req) {
        if (req.kind == PromptKind::LabelRound2)
          for (const auto& ex : req.vars.at("examples")) shown.push_back(ex.at("label").get<std::string>());
        return to_json(LabelPrediction{req.kind == PromptKind::LabelRound1 ? first : proposed, "r"}).dump();
      });
      StrategyPlanner planner(*gw, "en");
      bool rejected = false;
      try {
        planner.predict_labels("I do not know what to do anymore.", {}, shared_store());
      } catch (const ExclusionViolation&) {
        rejected = true;
      }
      c.expect(rejected, "round 2 accepted " + to_string(proposed) + " after " + to_string(first));
      for (const auto& s : shown)
        c.expect(!is_excluded(*parse_mi_label(s), first), "round 2 was shown an excluded example " + s);
    }
  }
}

void critic_ops(Check& c) {
  std::mt19937_64 rng(777);
  const std::vector<std::string> statements = {"That sounds exhausting.", "You have been carrying a lot.",
                                               "It makes sense to feel this way.", "Thank you for telling me."};
  const std::vector<std::string> questions = {"What happened after that?", "How did you cope?",
                                              "Who do you turn to?", "What matters most here?"};
  const std::vector<CandidateQuestion> pool = {{SlotId::Impact, "i", "How is this affecting your sleep?", "w", 0.6},
                                               {SlotId::Presenting, "i", "What feels heaviest today?", "w", 0.8},
                                               {SlotId::Impact, "i", "What has changed at work?", "w", 0.9}};
  for (int trial = 0; trial < 1000; ++trial) {
    std::string draft;
    const int n = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n; ++i) {
      const bool q = std::bernoulli_distribution(0.4)(rng);
      draft += (draft.empty() ? "" : " ") + pick(rng, q ? questions : statements);
    }
    CriticDecision d;
    d.question_op.action = static_cast<QuestionAction>(trial % 4);
    d.question_op.slot = std::bernoulli_distribution(0.5)(rng) ? SlotId::Impact : SlotId::Presenting;
    const std::size_t before = text::count_question_sentences(draft);
    const std::size_t after = text::count_question_sentences(apply_ops(draft, d, pool));
    std::size_t want = 0;
    switch (d.question_op.action) {
      case QuestionAction::Keep: want = before; break;
      case QuestionAction::Remove: want = 0; break;
      case QuestionAction::Add: want = before + 1; break;
      case QuestionAction::Replace: want = 1; break;
    }
    c.expect(after == want, "trial " + std::to_string(trial) + " (" + to_string(d.question_op.action) + ") left " +
                                std::to_string(after) + " questions, expected " + std::to_string(want));
  }
}

void memory_conservatism(Check& c) {
  const auto& lexicon = default_slot_cue_lexicon();
  const std::vector<std::string> neutral = {"blue", "table", "river", "morning", "coffee"};
  std::mt19937_64 rng(4242);
  std::bernoulli_distribution coin(0.5);

  for (int turn = 0; turn < 500; ++turn) {
    const int ti = std::uniform_int_distribution<int>(0, 15)(rng);
    const PppppiAnalysis prior = random_analysis(rng, ti);
    TurnRecord record{"summary", {}, {}, {}};
    PppppiSpans spans;
    for (SlotId s : canonical_slot_order()) {
      const auto& cues = lexicon[slot_index(s)];
      const int roll = std::uniform_int_distribution<int>(0, 3)(rng);
      if (roll == 0) spans[s] = {"a quoted span"};
      if (roll == 1) record.keywords.push_back(cues[std::uniform_int_distribution<std::size_t>(0, cues.size() - 1)(rng)]);
    }
    record.keywords.push_back(pick(rng, neutral));

    std::array<bool, 6> evidenced{};
    for (SlotId s : canonical_slot_order()) {
      bool ev = !spans[s].empty();
      for (const auto& kw : record.keywords)
        for (const auto& cue : lexicon[slot_index(s)])
          if (kw == cue) ev = true;
      evidenced[slot_index(s)] = ev;
    }

    const bool legit_for_evidenced = coin(rng);
    auto gw = overridden_gateway([&](const BackendRequest& req) -> std::optional<std::string> {
      if (req.kind != PromptKind::PppppiUpdate) return std::nullopt;
      PppppiAnalysis proposal = validate<PppppiAnalysis>(req.vars.at("current_analysis"));
      for (SlotId s : canonical_slot_order()) {
        PppppiEntry& e = proposal[s];
        e.text += " (revised)";
        e.changed = true;
        e.is_inferred = false;
        e.evidence = evidenced[slot_index(s)] && legit_for_evidenced ? std::vector<std::string>{"a quoted span"}
                                                                      : std::vector<std::string>{};
      }
      return to_json(proposal).dump();
    });
    MemoryModule memory(*gw, MemoryConfig{}, "en");
    const PppppiUpdate out = memory.update_pppppi(prior, record, spans, TomState{}, ti);

    const Json before = to_json(prior);
    const Json after = to_json(out.analysis);
    for (SlotId s : canonical_slot_order()) {
      if (evidenced[slot_index(s)]) continue;
      Json expected = before.at(to_string(s));
      expected["changed"] = 0;
      c.expect(after.at(to_string(s)).dump() == expected.dump(),
               "turn " + std::to_string(turn) + " mutated unevidenced slot " + to_string(s));
    }
  }
}

void mode_wiring(Check& c) {
  for (SessionMode mode : all_session_modes()) {
    auto gw = mock_gateway();
    EngineConfig cfg;
    cfg.language = "en";
    Engine engine(cfg, *gw, shared_store());
    engine.run_turn({mode, "I failed my exam yesterday and now I can't sleep.", {}, std::nullopt, "anxious"},
                    MemoryState{});
    std::vector<PromptKind> kinds;
    for (const auto& e : gw->ledger()) kinds.push_back(e.kind);
    std::sort(kinds.begin(), kinds.end());
    c.expect(kinds == expected_prompt_kinds(mode), "ledger multiset differs for " + to_string(mode));
    c.note(to_string(mode) + "=" + std::to_string(kinds.size()) + " calls");
  }
}

void golden_replay(Check& c) {
  eval::Runner runner;
  runner.assets_dir = asset_dir();
  runner.engine.language = "en";
  const auto golden = read_transcript(test_dir() / "golden" / "full_en_10turn.jsonl");
  const auto again = eval::replay(golden, runner);
  c.expect(golden.size() == 20, "golden transcript does not hold 10 turns");
  c.expect(again.size() == golden.size(), "replay length differs");
  for (std::size_t i = 0; i < std::min(golden.size(), again.size()); ++i) {
    const auto& g = golden[i];
    const auto& a = again[i];
    c.expect(a.speaker == g.speaker && a.text == g.text, "entry " + std::to_string(i) + " text differs");
    if (g.speaker != "agent") continue;
    c.expect(a.stage_artifacts.dump() == g.stage_artifacts.dump(), "entry " + std::to_string(i) + " artifacts differ");
    c.expect(a.memory_snapshot.dump() == g.memory_snapshot.dump(), "entry " + std::to_string(i) + " memory differs");
    c.expect(text::count_sentences(g.text) <= 4, "entry " + std::to_string(i) + " exceeds four sentences");
    c.expect(text::count_question_sentences(g.text) <= 1, "entry " + std::to_string(i) + " asks more than one question");
  }
}

void metrics(Check& c) {
  std::mt19937_64 rng(31337);
  for (int i = 0; i < 100; ++i) {
    const auto cand = oracle::random_tokens(rng, 10);
    const auto ref = oracle::random_tokens(rng, 10);
    const std::string id = "pair " + std::to_string(i);
    for (int n = 1; n <= 2; ++n)
      c.expect(std::abs(eval::rouge_n(cand, ref, n) - oracle::rouge_n(cand, ref, n)) <= kMetricTolerance,
               id + " rouge-" + std::to_string(n));
    c.expect(std::abs(eval::rouge_l(cand, ref) - oracle::rouge_l(cand, ref)) <= kMetricTolerance, id + " rouge-l");
    for (bool smooth : {false, true}) {
      const auto got = eval::bleu(cand, {ref}, 4, smooth);
      const auto want = oracle::bleu(cand, ref, smooth);
      for (int n = 0; n < 4; ++n)
        c.expect(std::abs(got[n] - want[n]) <= kMetricTolerance, id + " bleu-" + std::to_string(n + 1));
    }
  }

  for (const std::string s : {"I hear how tired you are today", "what feels hardest right now for you"}) {
    const auto t = eval::tokenize(s, eval::Tokenizer::Whitespace);
    c.expect(eval::rouge_n(t, t, 1) == 1.0 && eval::rouge_n(t, t, 2) == 1.0 && eval::rouge_l(t, t) == 1.0,
             "identical rouge is not exactly 1.0");
    for (double b : eval::bleu(t, {t})) c.expect(b == 1.0, "identical bleu is not exactly 1.0");
  }

  // Hand count over the twelve agent turns of the shipped Korean dialogue:
  // turns 2, 3, 5, 6, 7, 8 and 9 contain a sentence ending in '?'.
  constexpr int kHandCountedQuestionTurns = 7;
  constexpr int kAgentTurns = 12;
  const auto transcript = read_transcript(test_dir() / "golden" / "ko_career_dialogue.jsonl");
  const double qr = eval::question_rate(transcript);
  c.expect(std::abs(qr - static_cast<double>(kHandCountedQuestionTurns) / kAgentTurns) <= kMetricTolerance,
           "question rate " + num(qr) + " differs from the hand count 7/12");
  int marked = 0;
  for (const auto& e : transcript)
    if (e.speaker == "agent" && e.stage_artifacts.value("marked_question", false)) ++marked;
  c.note("QR=" + num(qr, 4) + " (7/12)");
  c.note("highlighted question turns " + std::to_string(marked) + "/12=" + num(marked / 12.0, 4) + ", informational");
}

std::shared_ptr<const PromptTemplates> bare_templates() {
  auto t = std::make_shared<PromptTemplates>();
  for (PromptKind k : all_prompt_kinds()) t->set(k, "prompt");
  return t;
}

template <class T>
std::string gate_path(PromptKind kind, const std::string& raw) {
  Gateway gw(mock_config(0), std::make_shared<FunctionBackend>([raw](const BackendRequest&) { return raw; }),
             bare_templates());
  try {
    gw.complete<T>({kind, Json::object(), 0});
  } catch (const MalformedAfterRetries& e) {
    return e.last_violation().path();
  }
  return "(accepted)";
}

void schema_gate(Check& c) {
  const auto cog = [&](const std::string& first) {
    return R"({"cognitive_errors":[)" + first +
           R"(,{"name":"Overgeneralization","present":false,"spans":[]},{"name":"Personalization","present":false,"spans":[]},{"name":"SelectiveAbstraction","present":false,"spans":[]}]})";
  };
  const std::string entry = R"({"text":"","evidence":[],"is_inferred":0,"changed":0,"provenance":[]})";
  const auto analysis = [&](const std::string& presenting) {
    return R"({"presenting":)" + presenting + R"(,"precipitating":)" + entry + R"(,"perpetuating":)" + entry +
           R"(,"predisposing":)" + entry + R"(,"protective":)" + entry + R"(,"impact":)" + entry + "}";
  };
  const std::string plan_tail =
      R"("act_plans":[{"act":"Affirm","focus":["self-efficacy support"],"key_points":[],"style_hints":[]}]})";

  struct Case {
    std::string name, expected, got;
  };
  std::vector<Case> cases = {
      {"not json", "$", gate_path<CognitiveErrorReport>(PromptKind::CognitiveError, "I think the user is sad.")},
      {"missing list", "cognitive_errors", gate_path<CognitiveErrorReport>(PromptKind::CognitiveError, "{}")},
      {"unknown category", "cognitive_errors[0].name",
       gate_path<CognitiveErrorReport>(PromptKind::CognitiveError, cog(R"({"name":"Magic","present":false,"spans":[]})"))},
      {"absent with spans", "cognitive_errors[0].spans",
       gate_path<CognitiveErrorReport>(PromptKind::CognitiveError,
                                       cog(R"({"name":"Catastrophizing","present":false,"spans":["x"]})"))},
      {"tom intent", "intent_label",
       gate_path<TomState>(PromptKind::Tom, R"({"beliefs":[],"desires":[],"intentions":[],"intent_label":"Dreaming"})")},
      {"record summary", "summary",
       gate_path<TurnRecord>(PromptKind::TurnHistory, R"({"keywords":[],"events":[],"emotions":[]})")},
      {"impact level", "events[0].impact_level",
       gate_path<TurnRecord>(PromptKind::TurnHistory,
                             R"({"summary":"s","keywords":[],"events":[{"event":"e","context":"c","impact_level":"huge"}],"emotions":[]})")},
      {"label enum", "label", gate_path<LabelPrediction>(PromptKind::LabelRound1, R"({"label":"Lecture","rationale":"r"})")},
      {"label rationale", "rationale", gate_path<LabelPrediction>(PromptKind::LabelRound1, R"({"label":"Affirm"})")},
      {"missing slot", "impact",
       gate_path<PppppiAnalysis>(PromptKind::PppppiUpdate,
                                 R"({"presenting":)" + entry + R"(,"precipitating":)" + entry + R"(,"perpetuating":)" +
                                     entry + R"(,"predisposing":)" + entry + R"(,"protective":)" + entry + "}")},
      {"entry flag", "presenting.changed",
       gate_path<PppppiAnalysis>(PromptKind::PppppiUpdate,
                                 analysis(R"({"text":"","evidence":[],"is_inferred":0,"changed":"yes","provenance":[]})"))},
      {"summary emotions", "core_emotion",
       gate_path<OverallSummary>(PromptKind::SummaryUpdate,
                                 R"({"core_narrative":"n.","core_emotion":"sad","recurring_themes":[],"analysis":)" +
                                     analysis(entry) + "}")},
      {"duplicate acts", "plan.speech_acts",
       gate_path<StrategyPlan>(PromptKind::StrategyGen,
                               R"({"plan":{"speech_acts":["Affirm","Affirm"],"goals":[{"act":"Affirm","goal":"g"}]},)" + plan_tail)},
      {"candidate slot", "candidates[0].slot",
       gate_path<CandidateList>(PromptKind::QuestionIdeation,
                                R"({"candidates":[{"slot":"mood","intent":"i","question":"How?","why":"w","confidence":0.5}]})")},
      {"candidate confidence", "candidates[0].confidence",
       gate_path<CandidateList>(PromptKind::QuestionIdeation,
                                R"({"candidates":[{"slot":"impact","intent":"i","question":"How?","why":"w","confidence":1.5}]})")},
      {"critic verdict", "verdict",
       gate_path<CriticDecision>(PromptKind::Critic,
                                 R"({"verdict":"great","rationale":"r","ops":{"question":{"action":"keep","text":null,"slot":null,"why":[]}}})")},
      {"critic action", "ops.question.action",
       gate_path<CriticDecision>(PromptKind::Critic,
                                 R"({"verdict":"ok","rationale":"r","ops":{"question":{"action":"rewrite","text":null,"slot":null,"why":[]}}})")},
      {"critic replace text", "ops.question.text",
       gate_path<CriticDecision>(PromptKind::Critic,
                                 R"({"verdict":"needs_fix","rationale":"r","ops":{"question":{"action":"replace","text":null,"slot":"impact","why":[]}}})")},
  };

  {
    auto gw = overridden_gateway(
        [](const BackendRequest& req) -> std::optional<std::string> {
          if (req.kind != PromptKind::PppppiAlign) return std::nullopt;
          return R"({"presenting":["never said"],"precipitating":[],"perpetuating":[],"predisposing":[],"protective":[],"impact":[]})";
        },
        0);
    StateBuilder sb(*gw, "en");
    std::string got = "(accepted)";
    try {
      sb.align_pppppi("I feel low today.", CognitiveErrorReport{});
    } catch (const MalformedAfterRetries& e) {
      got = e.last_violation().path();
    }
    cases.push_back({"ungrounded slot span", "presenting[0]", got});
  }
  {
    auto gw = overridden_gateway(
        [&](const BackendRequest& req) -> std::optional<std::string> {
          if (req.kind != PromptKind::CognitiveError) return std::nullopt;
          return cog(R"({"name":"Catastrophizing","present":true,"spans":["the world is ending"]})");
        },
        0);
    StateBuilder sb(*gw, "en");
    std::string got = "(accepted)";
    try {
      sb.extract_cognitive_errors("I feel low today.");
    } catch (const MalformedAfterRetries& e) {
      got = e.last_violation().path();
    }
    cases.push_back({"ungrounded error span", "cognitive_errors[0].spans[0]", got});
  }

  for (const auto& k : cases) c.expect(k.got == k.expected, k.name + ": path '" + k.got + "' expected '" + k.expected + "'");
  c.note(std::to_string(cases.size()) + " malformed outputs");

  std::vector<std::string> prompts;
  Gateway gw(mock_config(2), std::make_shared<FunctionBackend>([&](const BackendRequest& req) {
               prompts.push_back(req.prompt);
               return std::string(R"({"label":"Lecture","rationale":"r"})");
             }),
             bare_templates());
  bool failed = false;
  try {
    gw.complete<LabelPrediction>({PromptKind::LabelRound1, Json::object(), 0});
  } catch (const MalformedAfterRetries& e) {
    failed = e.attempts() == 3;
  }
  c.expect(failed, "retries were not exhausted after three attempts");
  c.expect(prompts.size() == 3 && prompts[1].find("rejected at `label`") != std::string::npos,
           "retry prompt does not carry the violation");
  c.expect(!gw.ledger().empty() && gw.ledger().back().outcome == "MalformedAfterRetries",
           "ledger outcome is not MalformedAfterRetries");

  int calls = 0;
  Gateway ok(mock_config(2), std::make_shared<FunctionBackend>([&](const BackendRequest&) {
               return std::string(++calls < 3 ? R"({"label":"Lecture"})" : R"({"label":"Affirm","rationale":"r"})");
             }),
             bare_templates());
  c.expect(ok.complete<LabelPrediction>({PromptKind::LabelRound1, Json::object(), 0}).label == MiLabel::Affirm &&
               ok.ledger().back().attempts == 3,
           "a compliant third attempt was not accepted");
}

}  // namespace

int main() {
  using namespace std::chrono_literals;
  const std::vector<Criterion> criteria = {
      {"gap-scorer", 1000ms, gap_scorer},
      {"ranking", 5000ms, ranking},
      {"exclusion-rule", 1000ms, exclusion},
      {"critic-ops", 5000ms, critic_ops},
      {"memory-conservatism", 10000ms, memory_conservatism},
      {"mode-wiring", 5000ms, mode_wiring},
      {"golden-replay", 10000ms, golden_replay},
      {"metrics", 10000ms, metrics},
      {"schema-gate", 5000ms, schema_gate},
  };
  int failed = 0;
  for (const auto& crit : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      crit.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("unexpected exception: ") + e.what());
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    check.expect(ms <= crit.budget, "over time budget");
    std::cout << (check.ok() ? "PASS " : "FAIL ") << crit.name << " (" << ms.count() << " ms of "
              << crit.budget.count() << " ms" << check.detail() << ")\n";
    if (!check.ok()) ++failed;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
