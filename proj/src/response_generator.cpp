#include "psyprobe/response_generator.hpp"

#include <algorithm>

namespace psyprobe {

namespace {

Json slot_scores(const std::vector<GapEntry>& entries) {
  Json out = Json::array();
  for (const auto& e : entries) out.push_back({{"slot", to_string(e.slot)}, {"score", e.score}});
  return out;
}

Json candidates_json(const std::vector<CandidateQuestion>& candidates) {
  Json out = Json::array();
  for (const auto& c : candidates) out.push_back(to_json(c));
  return out;
}

double score_of(const GapRanking& ranking, SlotId slot) {
  for (const auto& e : ranking.entries)
    if (e.slot == slot) return e.score;
  return 0.0;
}

std::string join_sentences(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

}  // namespace

void GapWeights::validate() const {
  if (w_content < 0 || w_evidence < 0 || w_prov < 0 || w_recency < 0)
    throw InvalidConfig("gap weights must be non-negative");
}

Json to_json(const GapFeatures& f) {
  return {{"f_content", f.f_content ? 1 : 0},
          {"f_evidence", f.f_evidence ? 1 : 0},
          {"f_prov", f.f_prov ? 1 : 0},
          {"f_recency", f.f_recency ? 1 : 0}};
}

Json to_json(const GapRanking& r) {
  Json out = Json::array();
  for (const auto& e : r.entries)
    out.push_back({{"slot", to_string(e.slot)}, {"score", e.score}, {"features", to_json(e.features)}});
  return out;
}

GapRanking gap_ranking_from_json(const Json& doc) {
  if (!doc.is_array()) throw SchemaViolation("$", "expected a list");
  GapRanking r;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string path = "[" + std::to_string(i) + "]";
    const Json& e = doc[i];
    if (!e.is_object()) throw SchemaViolation(path, "expected an object");
    auto slot = e.contains("slot") && e.at("slot").is_string() ? parse_slot(e.at("slot").get<std::string>())
                                                                : std::nullopt;
    if (!slot) throw SchemaViolation(path + ".slot", "unknown slot");
    if (!e.contains("score") || !e.at("score").is_number()) throw SchemaViolation(path + ".score", "expected a number");
    GapEntry g{*slot, e.at("score").get<double>(), {}};
    const Json f = e.value("features", Json::object());
    g.features = {f.value("f_content", 0) == 1, f.value("f_evidence", 0) == 1, f.value("f_prov", 0) == 1,
                  f.value("f_recency", 0) == 1};
    r.entries.push_back(g);
  }
  return r;
}

GapFeatures gap_features(const PppppiEntry& entry, int turn_index, int window) {
  if (window < 1) throw PreconditionViolation("provenance window must be at least 1");
  GapFeatures f;
  f.f_content = text::is_blank(entry.text);
  f.f_evidence = entry.evidence.empty() || entry.is_inferred;
  f.f_prov = std::none_of(entry.provenance.begin(), entry.provenance.end(),
                          [&](int p) { return p <= turn_index && turn_index - p < window; });
  f.f_recency = !entry.changed;
  return f;
}

double gap_score(const GapFeatures& f, const GapWeights& w) {
  double s = 0.0;
  if (f.f_content) s += w.w_content;
  if (f.f_evidence) s += w.w_evidence;
  if (f.f_prov) s += w.w_prov;
  if (f.f_recency) s += w.w_recency;
  return std::clamp(s, 0.0, 1.0);
}

GapRanking rank_gaps(const PppppiAnalysis& analysis, int turn_index, const GapWeights& w, int window) {
  GapRanking r;
  for (SlotId s : canonical_slot_order()) {
    const GapFeatures f = gap_features(analysis[s], turn_index, window);
    r.entries.push_back({s, gap_score(f, w), f});
  }
  std::stable_sort(r.entries.begin(), r.entries.end(),
                   [](const GapEntry& a, const GapEntry& b) { return a.score > b.score; });
  return r;
}

std::vector<GapEntry> ideation_slots(const GapRanking& ranking, const std::string& latest_utterance,
                                     const IdeationConfig& config) {
  if (config.k < 1) throw PreconditionViolation("k must be at least 1");
  const bool ready = std::any_of(config.readiness_cues.begin(), config.readiness_cues.end(),
                                 [&](const std::string& cue) { return text::contains_term(latest_utterance, cue); });
  std::vector<GapEntry> out;
  for (std::size_t i = 0; i < ranking.entries.size() && i < config.k; ++i) {
    const GapEntry& e = ranking.entries[i];
    if (e.slot == SlotId::Protective && e.score < config.tau_protective && !ready) continue;
    out.push_back(e);
  }
  return out;
}

std::vector<CandidateQuestion> ResponseGenerator::ideate_questions(const GapRanking& ranking,
                                                                   const PppppiAnalysis& analysis,
                                                                   const std::vector<DialogueTurn>& recent_turns,
                                                                   const std::vector<std::string>& keywords,
                                                                   const std::vector<std::string>& asked_questions,
                                                                   int turn_index) const {
  const std::string latest = !recent_turns.empty() && recent_turns.back().speaker == "user" ? recent_turns.back().text
                                                                                            : std::string{};
  const auto eligible = ideation_slots(ranking, latest, config_);
  CandidateList list = gateway_.complete<CandidateList>({PromptKind::QuestionIdeation,
                                                         {{"analysis", to_json(analysis)},
                                                          {"recent_turns", to_json(recent_turns)},
                                                          {"keywords", keywords},
                                                          {"top_slots", slot_scores(eligible)},
                                                          {"asked_questions", asked_questions},
                                                          {"k", config_.k},
                                                          {"language", language_}},
                                                         turn_index});
  std::vector<CandidateQuestion> out;
  for (auto& c : list.candidates) {
    const bool ok = std::any_of(eligible.begin(), eligible.end(), [&](const GapEntry& e) { return e.slot == c.slot; });
    if (ok) out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [&](const CandidateQuestion& a, const CandidateQuestion& b) {
    const double sa = score_of(ranking, a.slot);
    const double sb = score_of(ranking, b.slot);
    if (sa != sb) return sa > sb;
    return a.confidence > b.confidence;
  });
  return out;
}

std::string ResponseGenerator::generate_draft(const StrategyPlan& plan, const std::string& utterance,
                                              const std::vector<CandidateQuestion>& candidates,
                                              const OverallSummary& memory, const std::vector<TurnRecord>& recent_records,
                                              int turn_index) const {
  check_invariants(plan);
  Json records = Json::array();
  for (const auto& r : recent_records) records.push_back(to_json(r));
  Json vars = {{"utterance", utterance},
               {"plan", to_json(plan)},
               {"candidates", candidates_json(candidates)},
               {"summary", to_json(memory)},
               {"recent_records", records},
               {"length_feedback", ""},
               {"language", language_}};
  Contract<TextResponse> contract;
  if (plan.has_act(MiLabel::OpenQuestion) && !candidates.empty()) {
    contract.check = [&](const TextResponse& r) {
      const bool quoted = std::any_of(candidates.begin(), candidates.end(), [&](const CandidateQuestion& c) {
        return r.text.find(c.question) != std::string::npos;
      });
      if (!quoted) throw SchemaViolation("draft", "question is not drawn from the candidate pool");
    };
  }
  std::string draft = gateway_.complete<TextResponse>({PromptKind::Draft, vars, turn_index}, contract).text;
  std::size_t n = text::count_sentences(draft);
  if (n <= kMaxDraftSentences) return draft;
  vars["length_feedback"] = "The previous draft had " + std::to_string(n) + " sentences; use at most four.";
  draft = gateway_.complete<TextResponse>({PromptKind::Draft, vars, turn_index}, contract).text;
  n = text::count_sentences(draft);
  if (n > kMaxDraftSentences)
    throw LengthViolation("draft has " + std::to_string(n) + " sentences after regeneration");
  return draft;
}

CriticDecision ResponseGenerator::critique(const std::string& draft, const std::vector<std::string>& recent_agent_turns,
                                           const std::string& narrative, const GapRanking& ranking,
                                           const std::vector<CandidateQuestion>& candidates, int turn_index) const {
  return gateway_.complete<CriticDecision>({PromptKind::Critic,
                                            {{"draft", draft},
                                             {"recent_agent_turns", recent_agent_turns},
                                             {"narrative", narrative},
                                             {"top_gaps", slot_scores(ranking.entries)},
                                             {"candidates", candidates_json(candidates)},
                                             {"language", language_}},
                                            turn_index});
}

std::string apply_ops(const std::string& draft, const CriticDecision& decision,
                      const std::vector<CandidateQuestion>& candidates) {
  const QuestionOp& op = decision.question_op;
  if (op.action == QuestionAction::Keep) return draft;

  const auto spans = text::split_sentences(draft);
  std::vector<std::string> sentences;
  std::vector<bool> is_q;
  for (const auto& s : spans) {
    sentences.emplace_back(s.view(draft));
    is_q.push_back(s.question);
  }

  if (op.action == QuestionAction::Remove) {
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < sentences.size(); ++i)
      if (!is_q[i]) kept.push_back(sentences[i]);
    return join_sentences(kept);
  }

  std::string replaced;
  if (op.action == QuestionAction::Replace) {
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (is_q[i]) {
        replaced = sentences[i];
        break;
      }
    }
  }
  const CandidateQuestion* best = nullptr;
  if (op.slot) {
    for (const auto& c : candidates) {
      if (c.slot != *op.slot || (!replaced.empty() && text::trim(c.question) == text::trim(replaced))) continue;
      if (!best || c.confidence > best->confidence) best = &c;
    }
  }
  std::string question;
  if (best) {
    question = best->question;
  } else if (op.text) {
    question = *op.text;
  } else {
    throw NoCandidateForSlot("no candidate for slot " + (op.slot ? to_string(*op.slot) : std::string("(none)")) +
                             " and no inline question");
  }
  question = text::trim(question);

  if (op.action == QuestionAction::Add) {
    const std::string base = text::trim(draft);
    return base.empty() ? question : base + " " + question;
  }
  std::vector<std::string> out;
  bool placed = false;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (!is_q[i]) {
      out.push_back(sentences[i]);
    } else if (!placed) {
      out.push_back(question);
      placed = true;
    }
  }
  if (!placed) out.push_back(question);
  return join_sentences(out);
}

}  // namespace psyprobe
