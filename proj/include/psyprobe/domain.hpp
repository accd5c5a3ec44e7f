#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "psyprobe/errors.hpp"

namespace psyprobe {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Enumerations. Every enum has a fixed wire name; parsing rejects anything
// else with a SchemaViolation instead of coercing.
// ---------------------------------------------------------------------------

enum class SlotId { Presenting, Precipitating, Perpetuating, Predisposing, Protective, Impact };
inline constexpr std::size_t kSlotCount = 6;

/// Presenting, Precipitating, Perpetuating, Predisposing, Protective, Impact.
/// Every module iterates and breaks ties in this order.
std::span<const SlotId, kSlotCount> canonical_slot_order();
std::size_t slot_index(SlotId s);

enum class CognitiveError { Catastrophizing, Overgeneralization, Personalization, SelectiveAbstraction };
inline constexpr std::size_t kCognitiveErrorCount = 4;
std::span<const CognitiveError, kCognitiveErrorCount> all_cognitive_errors();

enum class MiProcess { Engaging, Focusing, Evoking, Planning };

enum class MiLabel {
  SimpleReflection,
  ComplexReflection,
  OpenQuestion,
  ClosedQuestion,
  Affirm,
  GiveInformation,
  Advise,
  General
};
inline constexpr std::size_t kMiLabelCount = 8;
std::span<const MiLabel, kMiLabelCount> all_mi_labels();

enum class FocusTag {
  BasicRestatement,
  ExpandedRestatement,
  EmotionReflection,
  MeaningExpansion,
  OpenProbing,
  FactChecking,
  SelfEfficacySupport,
  InformationGiving,
  Advising,
  Bridging
};

enum class ImpactLevel { High, Medium, Low };
enum class Verdict { Ok, NeedsFix };
enum class QuestionAction { Keep, Add, Replace, Remove };
enum class SessionMode { Baseline, Full, WoSB, WoSP, WoQIC };
std::span<const SessionMode, 5> all_session_modes();

std::string to_string(SlotId v);
std::string to_string(CognitiveError v);
std::string to_string(MiProcess v);
std::string to_string(MiLabel v);
std::string to_string(FocusTag v);
std::string to_string(ImpactLevel v);
std::string to_string(Verdict v);
std::string to_string(QuestionAction v);
std::string to_string(SessionMode v);

std::optional<SlotId> parse_slot(std::string_view s);
std::optional<CognitiveError> parse_cognitive_error(std::string_view s);
std::optional<MiProcess> parse_mi_process(std::string_view s);
std::optional<MiLabel> parse_mi_label(std::string_view s);
std::optional<FocusTag> parse_focus_tag(std::string_view s);
std::optional<ImpactLevel> parse_impact_level(std::string_view s);
std::optional<Verdict> parse_verdict(std::string_view s);
std::optional<QuestionAction> parse_question_action(std::string_view s);
std::optional<SessionMode> parse_session_mode(std::string_view s);

// ---------------------------------------------------------------------------
// State builder outputs
// ---------------------------------------------------------------------------

struct CognitiveErrorFlag {
  CognitiveError name = CognitiveError::Catastrophizing;
  bool present = false;
  std::vector<std::string> spans;  // verbatim substrings of the source utterance

  bool operator==(const CognitiveErrorFlag&) const = default;
};

/// Exactly one flag per category, in enum order.
struct CognitiveErrorReport {
  std::vector<CognitiveErrorFlag> flags;

  const CognitiveErrorFlag& operator[](CognitiveError e) const { return flags.at(static_cast<std::size_t>(e)); }
  bool operator==(const CognitiveErrorReport&) const = default;
};

/// Evidence spans per slot. Spans may repeat across slots.
struct PppppiSpans {
  std::array<std::vector<std::string>, kSlotCount> by_slot;

  std::vector<std::string>& operator[](SlotId s) { return by_slot[slot_index(s)]; }
  const std::vector<std::string>& operator[](SlotId s) const { return by_slot[slot_index(s)]; }
  bool empty() const;
  bool operator==(const PppppiSpans&) const = default;
};

struct TomState {
  std::vector<std::string> beliefs;
  std::vector<std::string> desires;
  std::vector<std::string> intentions;
  MiProcess intent_label = MiProcess::Engaging;

  bool operator==(const TomState&) const = default;
};

// ---------------------------------------------------------------------------
// Memory
// ---------------------------------------------------------------------------

struct PppppiEntry {
  std::string text;
  std::vector<std::string> evidence;
  bool is_inferred = false;
  bool changed = false;
  std::vector<int> provenance;  // user-turn indices supporting the entry

  /// Text and evidence identical; flags and provenance are ignored.
  bool same_content(const PppppiEntry& other) const { return text == other.text && evidence == other.evidence; }
  bool operator==(const PppppiEntry&) const = default;
};

struct PppppiAnalysis {
  std::array<PppppiEntry, kSlotCount> entries;

  PppppiEntry& operator[](SlotId s) { return entries[slot_index(s)]; }
  const PppppiEntry& operator[](SlotId s) const { return entries[slot_index(s)]; }
  bool operator==(const PppppiAnalysis&) const = default;
};

struct TurnEvent {
  std::string event;
  std::string context;
  ImpactLevel impact_level = ImpactLevel::Medium;
  bool operator==(const TurnEvent&) const = default;
};

struct EmotionTrigger {
  std::string emotion;
  std::string trigger;
  bool operator==(const EmotionTrigger&) const = default;
};

struct TurnRecord {
  std::string summary;
  std::vector<std::string> keywords;
  std::vector<TurnEvent> events;
  std::vector<EmotionTrigger> emotions;
  bool operator==(const TurnRecord&) const = default;
};

/// Narrative snapshot produced by the summary stage; the analysis is
/// attached by the engine.
struct SummaryText {
  std::string core_narrative;
  std::vector<std::string> core_emotion;
  std::vector<std::string> recurring_themes;
  bool operator==(const SummaryText&) const = default;
};

struct OverallSummary {
  std::string core_narrative;
  std::vector<std::string> core_emotion;
  std::vector<std::string> recurring_themes;
  PppppiAnalysis analysis;
  bool operator==(const OverallSummary&) const = default;
};

// ---------------------------------------------------------------------------
// Strategy
// ---------------------------------------------------------------------------

struct FewShotExample {
  std::string client_utterance;
  std::string counselor_response;
  MiLabel label = MiLabel::General;
  bool operator==(const FewShotExample&) const = default;
};

struct LabelPrediction {
  MiLabel label = MiLabel::General;
  std::string rationale;
  bool operator==(const LabelPrediction&) const = default;
};

struct ActGoal {
  MiLabel act = MiLabel::General;
  std::string goal;
  bool operator==(const ActGoal&) const = default;
};

struct ActPlan {
  MiLabel act = MiLabel::General;
  std::vector<FocusTag> focus;
  std::vector<std::string> key_points;
  std::vector<std::string> style_hints;
  bool operator==(const ActPlan&) const = default;
};

struct StrategyPlan {
  std::vector<MiLabel> speech_acts;  // primary first, optional secondary
  std::vector<ActGoal> goals;
  std::vector<ActPlan> act_plans;

  bool has_act(MiLabel l) const;
  bool operator==(const StrategyPlan&) const = default;
};

// ---------------------------------------------------------------------------
// Response generation
// ---------------------------------------------------------------------------

struct CandidateQuestion {
  SlotId slot = SlotId::Presenting;
  std::string intent;
  std::string question;
  std::string why;
  double confidence = 0.0;
  bool operator==(const CandidateQuestion&) const = default;
};

struct CandidateList {
  std::vector<CandidateQuestion> candidates;
  bool operator==(const CandidateList&) const = default;
};

struct QuestionOp {
  QuestionAction action = QuestionAction::Keep;
  std::optional<std::string> text;
  std::optional<SlotId> slot;
  std::vector<std::string> why;
  bool operator==(const QuestionOp&) const = default;
};

struct CriticDecision {
  Verdict verdict = Verdict::Ok;
  std::string rationale;
  QuestionOp question_op;
  bool operator==(const CriticDecision&) const = default;
};

/// Plain-text stage output (draft and baseline turns).
struct TextResponse {
  std::string text;
  bool operator==(const TextResponse&) const = default;
};

/// One line of dialogue as seen by the stages; speaker is "user" or "agent".
struct DialogueTurn {
  std::string speaker;
  std::string text;
  bool operator==(const DialogueTurn&) const = default;
};

// ---------------------------------------------------------------------------
// Canonical JSON encoding. Field names follow the stage output schemas.
// ---------------------------------------------------------------------------

Json to_json(const CognitiveErrorFlag& v);
Json to_json(const CognitiveErrorReport& v);
Json to_json(const PppppiSpans& v);
Json to_json(const TomState& v);
Json to_json(const PppppiEntry& v);
Json to_json(const PppppiAnalysis& v);
Json to_json(const TurnRecord& v);
Json to_json(const SummaryText& v);
Json to_json(const OverallSummary& v);
Json to_json(const FewShotExample& v);
Json to_json(const LabelPrediction& v);
Json to_json(const StrategyPlan& v);
Json to_json(const CandidateQuestion& v);
Json to_json(const CandidateList& v);
Json to_json(const CriticDecision& v);
Json to_json(const std::vector<DialogueTurn>& v);

/// Strict parsers. Each checks the type's invariants and throws
/// SchemaViolation naming the first offending path (prefixed by `path`).
void parse(const Json& doc, const std::string& path, CognitiveErrorFlag& out);
void parse(const Json& doc, const std::string& path, CognitiveErrorReport& out);
void parse(const Json& doc, const std::string& path, PppppiSpans& out);
void parse(const Json& doc, const std::string& path, TomState& out);
void parse(const Json& doc, const std::string& path, PppppiEntry& out);
void parse(const Json& doc, const std::string& path, PppppiAnalysis& out);
void parse(const Json& doc, const std::string& path, TurnRecord& out);
void parse(const Json& doc, const std::string& path, SummaryText& out);
void parse(const Json& doc, const std::string& path, OverallSummary& out);
void parse(const Json& doc, const std::string& path, FewShotExample& out);
void parse(const Json& doc, const std::string& path, LabelPrediction& out);
void parse(const Json& doc, const std::string& path, StrategyPlan& out);
void parse(const Json& doc, const std::string& path, CandidateQuestion& out);
void parse(const Json& doc, const std::string& path, CandidateList& out);
void parse(const Json& doc, const std::string& path, CriticDecision& out);

/// Validates a parsed document against the schema of `T`.
template <class T>
T validate(const Json& doc) {
  T out{};
  parse(doc, "", out);
  return out;
}

/// Parses structured text then validates. Unparseable text is reported as a
/// violation at the root path "$".
template <class T>
T validate_text(std::string_view raw) {
  Json doc = Json::parse(raw, nullptr, false);
  if (doc.is_discarded()) throw SchemaViolation("$", "response is not valid JSON");
  return validate<T>(doc);
}

/// Span groundedness: every span must be a verbatim substring of `source`.
void check_grounded(const CognitiveErrorReport& report, std::string_view source);
void check_grounded(const PppppiSpans& spans, std::string_view source);

/// Invariant checks shared by parse() and by code that builds values directly.
void check_invariants(const CriticDecision& d, const std::string& path = "");
void check_invariants(const StrategyPlan& p, const std::string& path = "");
void check_invariants(const CandidateQuestion& c, const std::string& path = "");

}  // namespace psyprobe
