#include "psyprobe/domain.hpp"

#include <algorithm>
#include <set>

#include "psyprobe/text.hpp"

namespace psyprobe {

namespace {

constexpr std::array<SlotId, kSlotCount> kSlotOrder = {SlotId::Presenting,   SlotId::Precipitating,
                                                        SlotId::Perpetuating, SlotId::Predisposing,
                                                        SlotId::Protective,   SlotId::Impact};
constexpr std::array<const char*, kSlotCount> kSlotNames = {"presenting",   "precipitating", "perpetuating",
                                                             "predisposing", "protective",    "impact"};

constexpr std::array<CognitiveError, kCognitiveErrorCount> kErrors = {
    CognitiveError::Catastrophizing, CognitiveError::Overgeneralization, CognitiveError::Personalization,
    CognitiveError::SelectiveAbstraction};
constexpr std::array<const char*, kCognitiveErrorCount> kErrorNames = {
    "Catastrophizing", "Overgeneralization", "Personalization", "SelectiveAbstraction"};

constexpr std::array<const char*, 4> kProcessNames = {"Engaging", "Focusing", "Evoking", "Planning"};

constexpr std::array<MiLabel, kMiLabelCount> kLabels = {
    MiLabel::SimpleReflection, MiLabel::ComplexReflection, MiLabel::OpenQuestion, MiLabel::ClosedQuestion,
    MiLabel::Affirm,           MiLabel::GiveInformation,   MiLabel::Advise,       MiLabel::General};
constexpr std::array<const char*, kMiLabelCount> kLabelNames = {
    "Simple Reflection", "Complex Reflection", "Open Question", "Closed Question",
    "Affirm",            "Give Information",   "Advise",        "General"};

constexpr std::array<const char*, 10> kFocusNames = {
    "basic restatement", "expanded restatement",  "emotion reflection", "meaning expansion", "open probing",
    "fact checking",     "self-efficacy support", "information giving", "advising",          "bridging"};

constexpr std::array<const char*, 3> kImpactNames = {"high", "medium", "low"};
constexpr std::array<const char*, 2> kVerdictNames = {"ok", "needs_fix"};
constexpr std::array<const char*, 4> kActionNames = {"keep", "add", "replace", "remove"};

constexpr std::array<SessionMode, 5> kModes = {SessionMode::Baseline, SessionMode::Full, SessionMode::WoSB,
                                               SessionMode::WoSP, SessionMode::WoQIC};
constexpr std::array<const char*, 5> kModeNames = {"baseline", "full", "wo_sb", "wo_sp", "wo_qic"};

template <class E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::array<const char*, N>& names) {
  for (std::size_t i = 0; i < N; ++i) {
    if (s == names[i]) return static_cast<E>(i);
  }
  return std::nullopt;
}

std::string join_path(const std::string& base, std::string_view field) {
  if (base.empty()) return std::string(field);
  return base + "." + std::string(field);
}

std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

// Field access with path-aware errors.
class Reader {
 public:
  Reader(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw SchemaViolation(path_.empty() ? "$" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }
  std::string at(std::string_view field) const { return join_path(path_, field); }
  bool has(std::string_view field) const {
    auto it = doc_.find(field);
    return it != doc_.end() && !it->is_null();
  }

  const Json& field(std::string_view name) const {
    auto it = doc_.find(name);
    if (it == doc_.end()) throw SchemaViolation(at(name), "missing required field");
    return *it;
  }

  std::string string(std::string_view name) const {
    const Json& v = field(name);
    if (!v.is_string()) throw SchemaViolation(at(name), "expected a string");
    return v.get<std::string>();
  }

  std::string nonempty_string(std::string_view name) const {
    std::string s = string(name);
    if (text::is_blank(s)) throw SchemaViolation(at(name), "must not be empty");
    return s;
  }

  bool flag(std::string_view name) const {
    const Json& v = field(name);
    if (v.is_boolean()) return v.get<bool>();
    if (v.is_number_integer()) {
      const auto i = v.get<long long>();
      if (i == 0 || i == 1) return i == 1;
    }
    throw SchemaViolation(at(name), "expected a boolean or 0/1");
  }

  std::vector<std::string> strings(std::string_view name) const {
    const Json& v = field(name);
    if (!v.is_array()) throw SchemaViolation(at(name), "expected a list");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw SchemaViolation(index_path(at(name), i), "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  const Json& list(std::string_view name) const {
    const Json& v = field(name);
    if (!v.is_array()) throw SchemaViolation(at(name), "expected a list");
    return v;
  }

  template <class E>
  E enumeration(std::string_view name, std::optional<E> (*parser)(std::string_view)) const {
    return enum_value(field(name), at(name), parser);
  }

  template <class E>
  static E enum_value(const Json& v, const std::string& path, std::optional<E> (*parser)(std::string_view)) {
    if (!v.is_string()) throw SchemaViolation(path, "expected an enumeration string");
    auto parsed = parser(v.get<std::string>());
    if (!parsed) throw SchemaViolation(path, "unknown value '" + v.get<std::string>() + "'");
    return *parsed;
  }

 private:
  const Json& doc_;
  std::string path_;
};

Json flag01(bool b) { return b ? 1 : 0; }

}  // namespace

std::span<const SlotId, kSlotCount> canonical_slot_order() { return kSlotOrder; }
std::size_t slot_index(SlotId s) { return static_cast<std::size_t>(s); }
std::span<const CognitiveError, kCognitiveErrorCount> all_cognitive_errors() { return kErrors; }
std::span<const MiLabel, kMiLabelCount> all_mi_labels() { return kLabels; }
std::span<const SessionMode, 5> all_session_modes() { return kModes; }

std::string to_string(SlotId v) { return kSlotNames[static_cast<std::size_t>(v)]; }
std::string to_string(CognitiveError v) { return kErrorNames[static_cast<std::size_t>(v)]; }
std::string to_string(MiProcess v) { return kProcessNames[static_cast<std::size_t>(v)]; }
std::string to_string(MiLabel v) { return kLabelNames[static_cast<std::size_t>(v)]; }
std::string to_string(FocusTag v) { return kFocusNames[static_cast<std::size_t>(v)]; }
std::string to_string(ImpactLevel v) { return kImpactNames[static_cast<std::size_t>(v)]; }
std::string to_string(Verdict v) { return kVerdictNames[static_cast<std::size_t>(v)]; }
std::string to_string(QuestionAction v) { return kActionNames[static_cast<std::size_t>(v)]; }
std::string to_string(SessionMode v) { return kModeNames[static_cast<std::size_t>(v)]; }

std::optional<SlotId> parse_slot(std::string_view s) { return lookup<SlotId>(s, kSlotNames); }
std::optional<CognitiveError> parse_cognitive_error(std::string_view s) {
  return lookup<CognitiveError>(s, kErrorNames);
}
std::optional<MiProcess> parse_mi_process(std::string_view s) { return lookup<MiProcess>(s, kProcessNames); }
std::optional<MiLabel> parse_mi_label(std::string_view s) { return lookup<MiLabel>(s, kLabelNames); }
std::optional<FocusTag> parse_focus_tag(std::string_view s) { return lookup<FocusTag>(s, kFocusNames); }
std::optional<ImpactLevel> parse_impact_level(std::string_view s) { return lookup<ImpactLevel>(s, kImpactNames); }
std::optional<Verdict> parse_verdict(std::string_view s) { return lookup<Verdict>(s, kVerdictNames); }
std::optional<QuestionAction> parse_question_action(std::string_view s) {
  return lookup<QuestionAction>(s, kActionNames);
}
std::optional<SessionMode> parse_session_mode(std::string_view s) { return lookup<SessionMode>(s, kModeNames); }

bool PppppiSpans::empty() const {
  return std::all_of(by_slot.begin(), by_slot.end(), [](const auto& v) { return v.empty(); });
}

bool StrategyPlan::has_act(MiLabel l) const {
  return std::find(speech_acts.begin(), speech_acts.end(), l) != speech_acts.end();
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

Json to_json(const CognitiveErrorFlag& v) {
  return {{"name", to_string(v.name)}, {"present", v.present}, {"spans", v.spans}};
}

Json to_json(const CognitiveErrorReport& v) {
  Json list = Json::array();
  for (const auto& f : v.flags) list.push_back(to_json(f));
  return {{"cognitive_errors", list}};
}

Json to_json(const PppppiSpans& v) {
  Json out = Json::object();
  for (SlotId s : kSlotOrder) out[to_string(s)] = v[s];
  return out;
}

Json to_json(const TomState& v) {
  return {{"beliefs", v.beliefs},
          {"desires", v.desires},
          {"intentions", v.intentions},
          {"intent_label", to_string(v.intent_label)}};
}

Json to_json(const PppppiEntry& v) {
  return {{"text", v.text},
          {"evidence", v.evidence},
          {"is_inferred", flag01(v.is_inferred)},
          {"changed", flag01(v.changed)},
          {"provenance", v.provenance}};
}

Json to_json(const PppppiAnalysis& v) {
  Json out = Json::object();
  for (SlotId s : kSlotOrder) out[to_string(s)] = to_json(v[s]);
  return out;
}

Json to_json(const TurnRecord& v) {
  Json events = Json::array();
  for (const auto& e : v.events)
    events.push_back({{"event", e.event}, {"context", e.context}, {"impact_level", to_string(e.impact_level)}});
  Json emotions = Json::array();
  for (const auto& e : v.emotions) emotions.push_back({{"emotion", e.emotion}, {"trigger", e.trigger}});
  return {{"summary", v.summary}, {"keywords", v.keywords}, {"events", events}, {"emotions", emotions}};
}

Json to_json(const SummaryText& v) {
  return {{"core_narrative", v.core_narrative},
          {"core_emotion", v.core_emotion},
          {"recurring_themes", v.recurring_themes}};
}

Json to_json(const OverallSummary& v) {
  return {{"core_narrative", v.core_narrative},
          {"core_emotion", v.core_emotion},
          {"recurring_themes", v.recurring_themes},
          {"analysis", to_json(v.analysis)}};
}

Json to_json(const FewShotExample& v) {
  return {{"client_utterance", v.client_utterance},
          {"counselor_response", v.counselor_response},
          {"label", to_string(v.label)}};
}

Json to_json(const LabelPrediction& v) { return {{"label", to_string(v.label)}, {"rationale", v.rationale}}; }

Json to_json(const StrategyPlan& v) {
  Json acts = Json::array();
  for (auto a : v.speech_acts) acts.push_back(to_string(a));
  Json goals = Json::array();
  for (const auto& g : v.goals) goals.push_back({{"act", to_string(g.act)}, {"goal", g.goal}});
  Json plans = Json::array();
  for (const auto& p : v.act_plans) {
    Json focus = Json::array();
    for (auto f : p.focus) focus.push_back(to_string(f));
    plans.push_back({{"act", to_string(p.act)},
                     {"focus", focus},
                     {"key_points", p.key_points},
                     {"style_hints", p.style_hints}});
  }
  return {{"plan", {{"speech_acts", acts}, {"goals", goals}}}, {"act_plans", plans}};
}

Json to_json(const CandidateQuestion& v) {
  return {{"slot", to_string(v.slot)},
          {"intent", v.intent},
          {"question", v.question},
          {"why", v.why},
          {"confidence", v.confidence}};
}

Json to_json(const CandidateList& v) {
  Json list = Json::array();
  for (const auto& c : v.candidates) list.push_back(to_json(c));
  return {{"candidates", list}};
}

Json to_json(const CriticDecision& v) {
  Json q = {{"action", to_string(v.question_op.action)}, {"why", v.question_op.why}};
  q["text"] = v.question_op.text ? Json(*v.question_op.text) : Json(nullptr);
  q["slot"] = v.question_op.slot ? Json(to_string(*v.question_op.slot)) : Json(nullptr);
  return {{"verdict", to_string(v.verdict)}, {"rationale", v.rationale}, {"ops", {{"question", q}}}};
}

Json to_json(const std::vector<DialogueTurn>& v) {
  Json out = Json::array();
  for (const auto& t : v) out.push_back({{"speaker", t.speaker}, {"text", t.text}});
  return out;
}

// ---------------------------------------------------------------------------
// Strict parsing
// ---------------------------------------------------------------------------

void parse(const Json& doc, const std::string& path, CognitiveErrorFlag& out) {
  Reader r(doc, path);
  out.name = r.enumeration<CognitiveError>("name", parse_cognitive_error);
  out.present = r.flag("present");
  out.spans = r.strings("spans");
  if (!out.present && !out.spans.empty()) throw SchemaViolation(r.at("spans"), "must be empty when present=false");
  for (std::size_t i = 0; i < out.spans.size(); ++i) {
    if (text::is_blank(out.spans[i])) throw SchemaViolation(index_path(r.at("spans"), i), "empty span");
  }
}

void parse(const Json& doc, const std::string& path, CognitiveErrorReport& out) {
  Reader r(doc, path);
  const Json& list = r.list("cognitive_errors");
  std::array<std::optional<CognitiveErrorFlag>, kCognitiveErrorCount> seen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    CognitiveErrorFlag f;
    const std::string p = index_path(r.at("cognitive_errors"), i);
    parse(list[i], p, f);
    auto& slot = seen[static_cast<std::size_t>(f.name)];
    if (slot) throw SchemaViolation(p + ".name", "duplicate category " + to_string(f.name));
    slot = std::move(f);
  }
  out.flags.clear();
  for (std::size_t i = 0; i < kCognitiveErrorCount; ++i) {
    if (!seen[i]) throw SchemaViolation(r.at("cognitive_errors"), "missing category " + to_string(kErrors[i]));
    out.flags.push_back(std::move(*seen[i]));
  }
}

void parse(const Json& doc, const std::string& path, PppppiSpans& out) {
  Reader r(doc, path);
  for (SlotId s : kSlotOrder) {
    out[s] = r.strings(to_string(s));
    for (std::size_t i = 0; i < out[s].size(); ++i) {
      if (text::is_blank(out[s][i]))
        throw SchemaViolation(index_path(r.at(to_string(s)), i), "empty span; use [] for no evidence");
    }
  }
}

void parse(const Json& doc, const std::string& path, TomState& out) {
  if (doc.is_object() && doc.contains("tom_state")) {
    parse(doc.at("tom_state"), join_path(path, "tom_state"), out);
    return;
  }
  Reader r(doc, path);
  out.beliefs = r.strings("beliefs");
  out.desires = r.strings("desires");
  out.intentions = r.strings("intentions");
  out.intent_label = r.enumeration<MiProcess>("intent_label", parse_mi_process);
}

void parse(const Json& doc, const std::string& path, PppppiEntry& out) {
  Reader r(doc, path);
  out.text = r.string("text");
  out.evidence = r.strings("evidence");
  out.is_inferred = r.flag("is_inferred");
  out.changed = r.flag("changed");
  out.provenance.clear();
  if (r.has("provenance")) {
    const Json& prov = r.list("provenance");
    for (std::size_t i = 0; i < prov.size(); ++i) {
      if (!prov[i].is_number_integer() || prov[i].get<long long>() < 0)
        throw SchemaViolation(index_path(r.at("provenance"), i), "expected a non-negative turn index");
      out.provenance.push_back(prov[i].get<int>());
    }
  }
}

void parse(const Json& doc, const std::string& path, PppppiAnalysis& out) {
  Reader r(doc, path);
  for (SlotId s : kSlotOrder) parse(r.field(to_string(s)), r.at(to_string(s)), out[s]);
}

void parse(const Json& doc, const std::string& path, TurnRecord& out) {
  Reader r(doc, path);
  out.summary = r.string("summary");
  out.keywords = r.strings("keywords");
  out.events.clear();
  const Json& events = r.list("events");
  for (std::size_t i = 0; i < events.size(); ++i) {
    Reader e(events[i], index_path(r.at("events"), i));
    out.events.push_back(
        {e.string("event"), e.string("context"), e.enumeration<ImpactLevel>("impact_level", parse_impact_level)});
  }
  out.emotions.clear();
  const Json& emotions = r.list("emotions");
  for (std::size_t i = 0; i < emotions.size(); ++i) {
    Reader e(emotions[i], index_path(r.at("emotions"), i));
    out.emotions.push_back({e.nonempty_string("emotion"), e.string("trigger")});
  }
}

void parse(const Json& doc, const std::string& path, SummaryText& out) {
  Reader r(doc, path);
  out.core_narrative = r.string("core_narrative");
  out.core_emotion = r.strings("core_emotion");
  out.recurring_themes = r.strings("recurring_themes");
}

void parse(const Json& doc, const std::string& path, OverallSummary& out) {
  Reader r(doc, path);
  out.core_narrative = r.string("core_narrative");
  out.core_emotion = r.strings("core_emotion");
  out.recurring_themes = r.strings("recurring_themes");
  parse(r.field("analysis"), r.at("analysis"), out.analysis);
}

void parse(const Json& doc, const std::string& path, FewShotExample& out) {
  Reader r(doc, path);
  out.client_utterance = r.nonempty_string("client_utterance");
  out.counselor_response = r.nonempty_string("counselor_response");
  out.label = r.enumeration<MiLabel>("label", parse_mi_label);
}

void parse(const Json& doc, const std::string& path, LabelPrediction& out) {
  Reader r(doc, path);
  out.label = r.enumeration<MiLabel>("label", parse_mi_label);
  out.rationale = r.nonempty_string("rationale");
}

void parse(const Json& doc, const std::string& path, StrategyPlan& out) {
  Reader top(doc, path);
  Reader plan(top.field("plan"), top.at("plan"));
  out = StrategyPlan{};
  const Json& acts = plan.list("speech_acts");
  for (std::size_t i = 0; i < acts.size(); ++i)
    out.speech_acts.push_back(
        Reader::enum_value<MiLabel>(acts[i], index_path(plan.at("speech_acts"), i), parse_mi_label));
  const Json& goals = plan.list("goals");
  for (std::size_t i = 0; i < goals.size(); ++i) {
    Reader g(goals[i], index_path(plan.at("goals"), i));
    out.goals.push_back({g.enumeration<MiLabel>("act", parse_mi_label), g.string("goal")});
  }
  const Json& plans = top.list("act_plans");
  for (std::size_t i = 0; i < plans.size(); ++i) {
    Reader p(plans[i], index_path(top.at("act_plans"), i));
    ActPlan ap;
    ap.act = p.enumeration<MiLabel>("act", parse_mi_label);
    const Json& focus = p.list("focus");
    for (std::size_t k = 0; k < focus.size(); ++k)
      ap.focus.push_back(Reader::enum_value<FocusTag>(focus[k], index_path(p.at("focus"), k), parse_focus_tag));
    ap.key_points = p.strings("key_points");
    ap.style_hints = p.strings("style_hints");
    out.act_plans.push_back(std::move(ap));
  }
  check_invariants(out, path);
}

void parse(const Json& doc, const std::string& path, CandidateQuestion& out) {
  Reader r(doc, path);
  out.slot = r.enumeration<SlotId>("slot", parse_slot);
  out.intent = r.nonempty_string("intent");
  out.question = r.nonempty_string("question");
  out.why = r.string("why");
  const Json& conf = r.field("confidence");
  if (!conf.is_number()) throw SchemaViolation(r.at("confidence"), "expected a number");
  out.confidence = conf.get<double>();
  check_invariants(out, path);
}

void parse(const Json& doc, const std::string& path, CandidateList& out) {
  Reader r(doc, path);
  const Json& list = r.list("candidates");
  out.candidates.clear();
  for (std::size_t i = 0; i < list.size(); ++i) {
    CandidateQuestion c;
    parse(list[i], index_path(r.at("candidates"), i), c);
    out.candidates.push_back(std::move(c));
  }
}

void parse(const Json& doc, const std::string& path, CriticDecision& out) {
  Reader r(doc, path);
  out.verdict = r.enumeration<Verdict>("verdict", parse_verdict);
  out.rationale = r.nonempty_string("rationale");
  Reader ops(r.field("ops"), r.at("ops"));
  Reader q(ops.field("question"), ops.at("question"));
  out.question_op = QuestionOp{};
  out.question_op.action = q.enumeration<QuestionAction>("action", parse_question_action);
  if (q.has("text")) out.question_op.text = q.string("text");
  if (q.has("slot")) out.question_op.slot = q.enumeration<SlotId>("slot", parse_slot);
  out.question_op.why = q.has("why") ? q.strings("why") : std::vector<std::string>{};
  check_invariants(out, path);
}

// ---------------------------------------------------------------------------
// Invariants
// ---------------------------------------------------------------------------

void check_invariants(const CriticDecision& d, const std::string& path) {
  const std::string q = join_path(path, "ops.question");
  const auto action = d.question_op.action;
  const bool needs_text = action == QuestionAction::Add || action == QuestionAction::Replace;
  if (needs_text) {
    if (!d.question_op.text) throw SchemaViolation(q + ".text", "required for action " + to_string(action));
    if (!text::is_single_question(*d.question_op.text))
      throw SchemaViolation(q + ".text", "must be one sentence ending with a question mark");
  } else if (d.question_op.text) {
    throw SchemaViolation(q + ".text", "must be absent for action " + to_string(action));
  }
  if (d.verdict == Verdict::Ok && action != QuestionAction::Keep)
    throw SchemaViolation(q + ".action", "verdict ok requires action keep");
}

void check_invariants(const StrategyPlan& p, const std::string& path) {
  const std::string acts_path = join_path(path, "plan.speech_acts");
  if (p.speech_acts.empty() || p.speech_acts.size() > 2)
    throw SchemaViolation(acts_path, "expected a primary and an optional secondary act");
  if (p.speech_acts.size() == 2 && p.speech_acts[0] == p.speech_acts[1])
    throw SchemaViolation(acts_path, "duplicate speech act");
  for (std::size_t i = 0; i < p.goals.size(); ++i) {
    if (!p.has_act(p.goals[i].act))
      throw SchemaViolation(index_path(join_path(path, "plan.goals"), i) + ".act", "act not in speech_acts");
  }
  std::set<MiLabel> planned;
  for (std::size_t i = 0; i < p.act_plans.size(); ++i) {
    if (!p.has_act(p.act_plans[i].act))
      throw SchemaViolation(index_path(join_path(path, "act_plans"), i) + ".act", "act not in speech_acts");
    planned.insert(p.act_plans[i].act);
  }
  for (auto a : p.speech_acts) {
    if (!planned.count(a)) throw SchemaViolation(join_path(path, "act_plans"), "missing plan for " + to_string(a));
  }
}

void check_invariants(const CandidateQuestion& c, const std::string& path) {
  if (!(c.confidence >= 0.0 && c.confidence <= 1.0))
    throw SchemaViolation(join_path(path, "confidence"), "must lie in [0,1]");
  if (!text::is_single_question(c.question))
    throw SchemaViolation(join_path(path, "question"), "must be one sentence ending with a question mark");
}

void check_grounded(const CognitiveErrorReport& report, std::string_view source) {
  for (std::size_t i = 0; i < report.flags.size(); ++i) {
    const auto& spans = report.flags[i].spans;
    for (std::size_t k = 0; k < spans.size(); ++k) {
      if (source.find(spans[k]) == std::string_view::npos)
        throw SchemaViolation("cognitive_errors[" + std::to_string(i) + "].spans[" + std::to_string(k) + "]",
                              "span '" + spans[k] + "' is not a substring of the utterance");
    }
  }
}

void check_grounded(const PppppiSpans& spans, std::string_view source) {
  for (SlotId s : kSlotOrder) {
    for (std::size_t k = 0; k < spans[s].size(); ++k) {
      if (source.find(spans[s][k]) == std::string_view::npos)
        throw SchemaViolation(to_string(s) + "[" + std::to_string(k) + "]",
                              "span '" + spans[s][k] + "' is not a substring of the utterance");
    }
  }
}

}  // namespace psyprobe
