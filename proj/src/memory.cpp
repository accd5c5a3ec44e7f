#include "psyprobe/memory.hpp"

#include <algorithm>

namespace psyprobe {

const SlotCueLexicon& default_slot_cue_lexicon() {
  static const SlotCueLexicon lexicon = {{
      {"overwhelmed", "anxious", "anxiety", "depressed", "distressed", "stressed", "stress", "sad", "worried",
       "ashamed", "shame", "lonely", "불안", "스트레스", "우울", "힘들", "답답", "걱정"},
      {"yesterday", "today", "recently", "conflict", "argument", "criticized", "fight", "exam", "breakup",
       "어제", "오늘", "최근", "요즘", "싸웠", "낙방"},
      {"always", "constantly", "never", "everyone", "my fault", "should", "must", "again", "계속", "자꾸", "맨날",
       "항상"},
      {"childhood", "growing up", "longstanding", "personality", "background", "어릴", "예전부터", "성격"},
      {"help", "support", "friend", "family", "walk", "strength", "value", "도움", "친구", "가족", "산책"},
      {"sleep", "focus", "concentrate", "work", "school", "avoid", "tired", "exhausted", "잠", "집중", "피곤",
       "일상"},
  }};
  return lexicon;
}

Json snapshot(const MemoryState& state) {
  Json history = Json::array();
  for (const auto& r : state.turn_history) history.push_back(to_json(r));
  return {{"turn_history", history}, {"summary", to_json(state.summary)}, {"turn_index", state.turn_index}};
}

MemoryState restore(const Json& doc) {
  if (!doc.is_object()) throw SchemaViolation("$", "expected an object");
  MemoryState s;
  const auto history = doc.find("turn_history");
  if (history == doc.end() || !history->is_array()) throw SchemaViolation("turn_history", "expected a list");
  for (std::size_t i = 0; i < history->size(); ++i) {
    TurnRecord r;
    parse((*history)[i], "turn_history[" + std::to_string(i) + "]", r);
    s.turn_history.push_back(std::move(r));
  }
  if (!doc.contains("summary")) throw SchemaViolation("summary", "missing required field");
  parse(doc.at("summary"), "summary", s.summary);
  const auto idx = doc.find("turn_index");
  if (idx == doc.end() || !idx->is_number_integer() || idx->get<int>() < 0)
    throw SchemaViolation("turn_index", "expected a non-negative integer");
  s.turn_index = idx->get<int>();
  return s;
}

void push_record(MemoryState& state, TurnRecord record, std::size_t capacity) {
  state.turn_history.push_back(std::move(record));
  while (state.turn_history.size() > capacity) state.turn_history.erase(state.turn_history.begin());
}

SlotMask slot_evidence(const TurnRecord& record, const PppppiSpans& spans, const SlotCueLexicon& cues) {
  SlotMask mask{};
  for (SlotId s : canonical_slot_order()) {
    const std::size_t i = slot_index(s);
    mask[i] = !spans[s].empty();
    for (const auto& kw : record.keywords) {
      if (mask[i]) break;
      mask[i] = std::any_of(cues[i].begin(), cues[i].end(),
                            [&](const std::string& cue) { return text::contains_term(kw, cue); });
    }
  }
  return mask;
}

std::vector<SlotId> conservatism_violations(const PppppiAnalysis& prior, const PppppiAnalysis& proposed,
                                            const SlotMask& evidence) {
  std::vector<SlotId> out;
  for (SlotId s : canonical_slot_order()) {
    const auto& before = prior[s];
    const auto& after = proposed[s];
    if (!evidence[slot_index(s)]) {
      if (!after.same_content(before) || after.is_inferred != before.is_inferred) out.push_back(s);
    } else if (!after.same_content(before) && after.evidence.empty() && !after.is_inferred) {
      out.push_back(s);
    }
  }
  return out;
}

void enforce_conservatism(const PppppiAnalysis& prior, const PppppiAnalysis& proposed, const SlotMask& evidence) {
  const auto bad = conservatism_violations(prior, proposed, evidence);
  if (bad.empty()) return;
  std::string names;
  for (SlotId s : bad) names += (names.empty() ? "" : ", ") + to_string(s);
  throw ConservatismViolation("update modifies slots without evidence or unmarked inference: " + names);
}

PppppiAnalysis finalize_update(const PppppiAnalysis& prior, const PppppiAnalysis& proposed, const PppppiSpans& spans,
                               const SlotMask& evidence, int turn_index) {
  PppppiAnalysis out;
  for (SlotId s : canonical_slot_order()) {
    const PppppiEntry& before = prior[s];
    PppppiEntry after = evidence[slot_index(s)] ? proposed[s] : before;
    after.provenance = before.provenance;
    after.changed = !after.same_content(before);
    if (after.changed) {
      after.provenance.push_back(turn_index);
      if (!spans[s].empty()) after.is_inferred = false;
    } else {
      after.is_inferred = before.is_inferred;
    }
    out[s] = std::move(after);
  }
  return out;
}

TurnRecord MemoryModule::build_turn_record(const std::string& utterance, const std::vector<DialogueTurn>& recent_turns,
                                           int turn_index) const {
  if (text::is_blank(utterance)) throw PreconditionViolation("turn history needs a non-empty utterance");
  return gateway_.complete<TurnRecord>(
      {PromptKind::TurnHistory,
       {{"utterance", utterance}, {"recent_turns", to_json(recent_turns)}, {"language", language_}},
       turn_index});
}

PppppiUpdate MemoryModule::update_pppppi(const PppppiAnalysis& current, const TurnRecord& record,
                                         const PppppiSpans& spans, const TomState& tom, int turn_index) const {
  const SlotMask evidence = slot_evidence(record, spans, config_.slot_cues);
  std::vector<SlotId> reverted;
  Contract<PppppiAnalysis> contract;
  contract.check = [&](const PppppiAnalysis& proposed) {
    const auto bad = conservatism_violations(current, proposed, evidence);
    if (!bad.empty())
      throw SchemaViolation(to_string(bad.front()), "ConservatismViolation: modified without evidence or inference mark");
  };
  contract.on_exhausted = [&](PppppiAnalysis proposed, const SchemaViolation&) {
    for (SlotId s : conservatism_violations(current, proposed, evidence)) {
      proposed[s] = current[s];
      reverted.push_back(s);
    }
    return proposed;
  };
  const PppppiAnalysis proposed = gateway_.complete<PppppiAnalysis>(
      {PromptKind::PppppiUpdate,
       {{"current_analysis", to_json(current)},
        {"turn_record", to_json(record)},
        {"pppppi_spans", to_json(spans)},
        {"tom_state", to_json(tom)},
        {"turn_index", turn_index},
        {"language", language_}},
       turn_index},
      contract);
  return {finalize_update(current, proposed, spans, evidence, turn_index), std::move(reverted)};
}

OverallSummary MemoryModule::update_summary(const OverallSummary& current, const TurnRecord& record,
                                            const PppppiAnalysis& analysis, const std::string& utterance,
                                            int turn_index) const {
  Contract<SummaryText> contract;
  contract.check = [](const SummaryText& s) {
    const auto n = text::count_sentences(s.core_narrative);
    if (n < 1 || n > 2) throw SchemaViolation("core_narrative", "expected 1-2 sentences");
  };
  const SummaryText prior{current.core_narrative, current.core_emotion, current.recurring_themes};
  const SummaryText next = gateway_.complete<SummaryText>({PromptKind::SummaryUpdate,
                                                           {{"utterance", utterance},
                                                            {"current_summary", to_json(prior)},
                                                            {"turn_record", to_json(record)},
                                                            {"analysis", to_json(analysis)},
                                                            {"language", language_}},
                                                           turn_index},
                                                          contract);
  return {next.core_narrative, next.core_emotion, next.recurring_themes, analysis};
}

}  // namespace psyprobe
