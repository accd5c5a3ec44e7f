#include "psyprobe/engine.hpp"

#include <algorithm>

namespace psyprobe {

namespace {

template <class F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.code(), e.what());
  }
}

std::vector<std::string> agent_texts(const std::vector<DialogueTurn>& turns) {
  std::vector<std::string> out;
  for (const auto& t : turns)
    if (t.speaker == "agent") out.push_back(t.text);
  return out;
}

Json candidates_json(const std::vector<CandidateQuestion>& candidates) {
  Json out = Json::array();
  for (const auto& c : candidates) out.push_back(to_json(c));
  return out;
}

}  // namespace

StrategyPlan EngineConfig::fixed_default_plan() {
  StrategyPlan p;
  p.speech_acts = {MiLabel::ComplexReflection, MiLabel::OpenQuestion};
  p.goals = {{MiLabel::ComplexReflection, "Reflect the feeling beneath the user's words."},
             {MiLabel::OpenQuestion, "Invite the user to elaborate on the least understood part of the concern."}};
  p.act_plans = {{MiLabel::ComplexReflection, {FocusTag::EmotionReflection}, {"stay grounded in what was said"}, {}},
                 {MiLabel::OpenQuestion, {FocusTag::OpenProbing}, {"build on the latest utterance"}, {}}};
  return p;
}

void EngineConfig::validate() const {
  weights.validate();
  if (tom_window < 1) throw InvalidConfig("tom_window must be at least 1");
  if (fewshot_k < 1) throw InvalidConfig("fewshot_k must be at least 1");
  if (gap_window < 1) throw InvalidConfig("gap_window must be at least 1");
  if (ideation.k < 1) throw InvalidConfig("ideation k must be at least 1");
  if (!(ideation.tau_protective >= 0.0 && ideation.tau_protective <= 1.0))
    throw InvalidConfig("tau_protective must lie in [0,1]");
  if (memory.history_capacity < 1) throw InvalidConfig("history_capacity must be at least 1");
  try {
    check_invariants(default_plan);
  } catch (const SchemaViolation& v) {
    throw InvalidConfig(std::string("default_plan: ") + v.what());
  }
}

EngineConfig engine_config_from_json(const Json& doc, EngineConfig c) {
  if (!doc.is_object()) throw InvalidConfig("engine config must be an object");
  try {
    c.language = doc.value("language", c.language);
    c.tom_window = doc.value("tom_window", c.tom_window);
    c.recent_records = doc.value("recent_records", c.recent_records);
    c.fewshot_k = doc.value("fewshot_k", c.fewshot_k);
    c.gap_window = doc.value("gap_window", c.gap_window);
    c.memory.history_capacity = doc.value("history_capacity", c.memory.history_capacity);
    if (auto w = doc.find("weights"); w != doc.end()) {
      c.weights.w_content = w->value("w_content", c.weights.w_content);
      c.weights.w_evidence = w->value("w_evidence", c.weights.w_evidence);
      c.weights.w_prov = w->value("w_prov", c.weights.w_prov);
      c.weights.w_recency = w->value("w_recency", c.weights.w_recency);
    }
    if (auto q = doc.find("ideation"); q != doc.end()) {
      c.ideation.k = q->value("k", c.ideation.k);
      c.ideation.tau_protective = q->value("tau_protective", c.ideation.tau_protective);
      if (q->contains("readiness_cues")) c.ideation.readiness_cues = q->at("readiness_cues").get<std::vector<std::string>>();
    }
    if (auto p = doc.find("default_plan"); p != doc.end()) c.default_plan = validate<StrategyPlan>(*p);
  } catch (const Json::exception& e) {
    throw InvalidConfig(std::string("engine config: ") + e.what());
  } catch (const SchemaViolation& e) {
    throw InvalidConfig(std::string("engine config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<PromptKind> expected_prompt_kinds(SessionMode mode) {
  using K = PromptKind;
  std::vector<K> kinds;
  switch (mode) {
    case SessionMode::Baseline:
      kinds = {K::BaselineCounselor};
      break;
    case SessionMode::Full:
      kinds = {K::CognitiveError, K::PppppiAlign, K::Tom,        K::TurnHistory,      K::PppppiUpdate, K::SummaryUpdate,
               K::LabelRound1,    K::LabelRound2, K::StrategyGen, K::QuestionIdeation, K::Draft,        K::Critic};
      break;
    case SessionMode::WoSB:
      kinds = {K::TurnHistory, K::PppppiUpdate,     K::SummaryUpdate, K::LabelRound1, K::LabelRound2,
               K::StrategyGen, K::QuestionIdeation, K::Draft,         K::Critic};
      break;
    case SessionMode::WoSP:
      kinds = {K::CognitiveError, K::PppppiAlign,      K::Tom,   K::TurnHistory, K::PppppiUpdate,
               K::SummaryUpdate,  K::QuestionIdeation, K::Draft, K::Critic};
      break;
    case SessionMode::WoQIC:
      kinds = {K::CognitiveError, K::PppppiAlign, K::Tom,         K::TurnHistory, K::PppppiUpdate,
               K::SummaryUpdate,  K::LabelRound1, K::LabelRound2, K::StrategyGen, K::Draft};
      break;
  }
  std::sort(kinds.begin(), kinds.end());
  return kinds;
}

std::vector<std::string> asked_questions(const std::vector<DialogueTurn>& history) {
  std::vector<std::string> out;
  for (const auto& t : history) {
    if (t.speaker != "agent") continue;
    for (const auto& q : text::detect_question_sentences(t.text)) out.emplace_back(q.view(t.text));
  }
  return out;
}

Engine::Engine(EngineConfig config, Gateway& gateway, std::vector<FewShotExample> store)
    : config_(std::move(config)),
      gateway_(gateway),
      store_(std::move(store)),
      state_builder_(gateway, config_.language, config_.tom_window),
      memory_(gateway, config_.memory, config_.language),
      planner_(gateway, config_.language),
      responder_(gateway, config_.ideation, config_.language) {
  config_.validate();
}

TurnOutput Engine::run_baseline(const TurnInput& input, const MemoryState& memory) const {
  std::vector<DialogueTurn> recent = tail(input.history, config_.tom_window);
  Contract<TextResponse> contract;
  contract.check = [](const TextResponse& r) {
    const auto n = text::count_sentences(r.text);
    if (n < 1 || n > kMaxDraftSentences) throw SchemaViolation("response", "expected 1-4 sentences");
  };
  const std::string reply = stage("baseline", [&] {
    return gateway_
        .complete<TextResponse>({PromptKind::BaselineCounselor,
                                 {{"utterance", input.utterance},
                                  {"recent_turns", to_json(recent)},
                                  {"concern", input.concern.value_or("")},
                                  {"emotion", input.emotion},
                                  {"language", config_.language}},
                                 memory.turn_index},
                                contract)
        .text;
  });
  TurnOutput out;
  out.reply = reply;
  out.memory = memory;
  out.memory.turn_index = memory.turn_index + 1;
  out.artifacts = {{"mode", to_string(input.mode)}, {"turn_index", memory.turn_index}};
  return out;
}

TurnOutput Engine::run_turn(const TurnInput& input, const MemoryState& memory) const {
  if (text::is_blank(input.utterance)) throw PreconditionViolation("message must not be empty");
  if (input.mode == SessionMode::Baseline) return run_baseline(input, memory);

  const SessionMode mode = input.mode;
  const int ti = memory.turn_index;
  const std::string source = input.concern && !text::is_blank(*input.concern) ? *input.concern : input.utterance;
  std::vector<DialogueTurn> recent = input.history;
  recent.push_back({"user", input.utterance});
  recent = tail(recent, config_.tom_window);
  const std::vector<DialogueTurn> prior_turns = tail(input.history, config_.tom_window);

  Json art = {{"mode", to_string(mode)}, {"turn_index", ti}};

  CognitiveErrorReport report;
  PppppiSpans spans;
  TomState tom;
  if (mode != SessionMode::WoSB) {
    report = stage("cognitive_errors", [&] { return state_builder_.extract_cognitive_errors(source, ti); });
    spans = stage("pppppi_alignment", [&] { return state_builder_.align_pppppi(source, report, ti); });
    tom = stage("tom", [&] { return state_builder_.infer_tom(recent, spans, ti); });
    art["state_source"] = source;
    art["cognitive_errors"] = to_json(report);
    art["pppppi_spans"] = to_json(spans);
    art["tom"] = to_json(tom);
  }

  MemoryState next = memory;
  const TurnRecord record =
      stage("turn_history", [&] { return memory_.build_turn_record(input.utterance, prior_turns, ti); });
  const PppppiUpdate update = stage("pppppi_update", [&] {
    return memory_.update_pppppi(memory.summary.analysis, record, spans, tom, ti);
  });
  next.summary = stage("summary_update", [&] {
    return memory_.update_summary(memory.summary, record, update.analysis, input.utterance, ti);
  });
  push_record(next, record, config_.memory.history_capacity);
  next.turn_index = ti + 1;
  art["turn_record"] = to_json(record);
  Json reverted = Json::array();
  for (SlotId s : update.reverted) reverted.push_back(to_string(s));
  art["reverted_slots"] = reverted;

  const GapRanking ranking = rank_gaps(next.summary.analysis, ti, config_.weights, config_.gap_window);
  art["ranking"] = to_json(ranking);

  StrategyPlan plan = config_.default_plan;
  if (mode != SessionMode::WoSP) {
    const auto examples = stage("fewshot", [&] { return retrieve_fewshot(input.utterance, store_, config_.fewshot_k); });
    const LabelPair labels =
        stage("label_prediction", [&] { return planner_.predict_labels(input.utterance, prior_turns, examples, ti); });
    plan = stage("strategy_generation", [&] {
      return planner_.generate_strategy(labels, input.utterance, tom, next.summary, ti);
    });
    art["labels"] = {to_json(labels.first), to_json(labels.second)};
  }
  art["plan"] = to_json(plan);

  std::vector<CandidateQuestion> candidates;
  if (mode != SessionMode::WoQIC) {
    candidates = stage("question_ideation", [&] {
      return responder_.ideate_questions(ranking, next.summary.analysis, recent, record.keywords,
                                         asked_questions(input.history), ti);
    });
    art["candidates"] = candidates_json(candidates);
  }

  std::vector<TurnRecord> records = next.turn_history;
  if (records.size() > config_.recent_records)
    records.erase(records.begin(), records.end() - static_cast<std::ptrdiff_t>(config_.recent_records));
  const std::string draft = stage("draft", [&] {
    return responder_.generate_draft(plan, input.utterance, candidates, next.summary, records, ti);
  });
  art["draft"] = draft;

  std::string reply = draft;
  if (mode != SessionMode::WoQIC) {
    const CriticDecision decision = stage("critic", [&] {
      return responder_.critique(draft, agent_texts(prior_turns), next.summary.core_narrative, ranking, candidates, ti);
    });
    art["critic"] = to_json(decision);
    reply = stage("refine", [&] { return apply_ops(draft, decision, candidates); });
  }

  TurnOutput out;
  out.reply = std::move(reply);
  out.memory = std::move(next);
  out.ranking = ranking;
  out.artifacts = std::move(art);
  return out;
}

}  // namespace psyprobe
