#include "psyprobe/mock_backend.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace psyprobe {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_trailing_punct(char32_t cp) {
  switch (cp) {
    case '.': case ',': case '!': case '?': case ';': case ':': case '"': case '\'': case ')': case ']':
    case 0x3002: case 0xFF1F: case 0xFF01: case 0xFF0C: case 0x3001: case 0x2026: case 0x201D: case 0x2019:
    case 0x300D: case 0x300F:
      return true;
    default:
      return false;
  }
}

bool is_leading_punct(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == '(' || cp == '[' || cp == 0x201C || cp == 0x2018 || cp == 0x300C ||
         cp == 0x300E;
}

std::string strip_trailing(std::string s) {
  for (;;) {
    if (s.empty()) return s;
    std::size_t start = s.size() - 1;
    while (start > 0 && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) --start;
    const auto cps = text::decode_utf8(std::string_view(s).substr(start));
    if (cps.size() != 1 || !is_trailing_punct(cps[0])) return s;
    s.erase(start);
  }
}

std::string strip_token(const std::string& token) {
  auto cps = text::decode_utf8(token);
  std::size_t b = 0;
  std::size_t e = cps.size();
  while (b < e && (is_leading_punct(cps[b]) || is_trailing_punct(cps[b]))) ++b;
  while (e > b && is_trailing_punct(cps[e - 1])) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) out += text::encode_utf8(cps[i]);
  return out;
}

bool has_non_ascii(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) >= 0x80; });
}

bool any_term(const std::string& haystack, const Json& terms) {
  for (const auto& t : terms) {
    if (text::contains_term(haystack, t.get<std::string>())) return true;
  }
  return false;
}

void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (!s.empty() && std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

std::string lang_of(const Json& vars) {
  const std::string l = vars.value("language", std::string("en"));
  return l == "ko" ? "ko" : "en";
}

std::string str_var(const Json& vars, const char* key) {
  auto it = vars.find(key);
  return it != vars.end() && it->is_string() ? it->get<std::string>() : std::string{};
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string last_user_text(const Json& turns) {
  if (!turns.is_array()) return {};
  for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
    if (it->value("speaker", std::string{}) == "user") return it->value("text", std::string{});
  }
  return {};
}

std::vector<std::string> question_sentences(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& span : text::detect_question_sentences(s)) out.emplace_back(span.view(s));
  return out;
}

std::string format_score(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

const char* intention_for(MiProcess p) {
  switch (p) {
    case MiProcess::Engaging: return "wants empathic support";
    case MiProcess::Focusing: return "wants to clarify the topic";
    case MiProcess::Evoking: return "wants to explore change";
    case MiProcess::Planning: return "wants to agree on next steps";
  }
  return "";
}

void require(bool ok, const std::string& what) {
  if (!ok) throw RuleTableInvalid(what);
}

}  // namespace

std::vector<std::string> cue_spans(const std::string& source, const std::string& term, int extend_words) {
  std::vector<std::string> out;
  for (std::size_t hit : text::find_term(source, term)) {
    std::size_t end = hit + term.size();
    if (end > hit && !is_space(source[end - 1])) {
      while (end < source.size() && !is_space(source[end])) ++end;
    }
    for (int n = 0; n < extend_words; ++n) {
      std::size_t p = end;
      while (p < source.size() && is_space(source[p])) ++p;
      if (p == source.size()) break;
      while (p < source.size() && !is_space(source[p])) ++p;
      end = p;
    }
    std::string span = strip_trailing(text::trim(source.substr(hit, end - hit)));
    span = strip_trailing(text::trim(span));
    push_unique(out, span);
  }
  return out;
}

MockBackend::MockBackend(Json table) : table_(std::move(table)) {}

MockBackend MockBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuleTableInvalid("cannot open rule table " + path.string());
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw RuleTableInvalid("rule table " + path.string() + " is not valid JSON");
  return from_json(doc);
}

MockBackend MockBackend::from_json(const Json& table) {
  require(table.is_object(), "rule table must be an object");
  for (const char* section :
       {"cognitive_error", "slot_cues", "turn_history", "tom", "labels", "strategy", "questions", "draft", "critic",
        "baseline"}) {
    require(table.contains(section) && table.at(section).is_object(), std::string("missing section '") + section + "'");
  }
  MockBackend mock(table);
  try {
    for (const auto& [name, terms] : table.at("cognitive_error").items()) {
      auto e = parse_cognitive_error(name);
      require(e.has_value(), "unknown cognitive error '" + name + "'");
      require(terms.is_array(), "cognitive_error." + name + " must be a list");
      for (const auto& t : terms) mock.error_terms_[*e].push_back(t.get<std::string>());
    }
    for (const auto& [name, cues] : table.at("slot_cues").items()) {
      auto slot = parse_slot(name);
      require(slot.has_value(), "unknown slot '" + name + "'");
      require(cues.is_array(), "slot_cues." + name + " must be a list");
      for (const auto& c : cues) {
        SlotCue cue{c.at("term").get<std::string>(), c.value("extend_words", 0)};
        require(!cue.term.empty() && cue.extend_words >= 0, "slot_cues." + name + " has an invalid cue");
        mock.slot_cues_[*slot].push_back(cue);
      }
    }
    const auto& th = table.at("turn_history");
    for (const auto& w : th.at("stopwords")) mock.stopwords_.push_back(w.get<std::string>());
    for (const auto& ev : th.at("events")) {
      require(parse_impact_level(ev.at("impact_level").get<std::string>()).has_value(), "bad impact_level");
      (void)ev.at("match").get<std::string>();
    }
    const auto& labels = table.at("labels");
    require(parse_mi_label(labels.at("round1_default").get<std::string>()).has_value(), "bad round1_default");
    for (const auto& r : labels.at("round1"))
      require(parse_mi_label(r.at("label").get<std::string>()).has_value(), "bad round1 label");
    require(labels.at("round2_preference").size() == kMiLabelCount, "round2_preference must list all labels");
    for (const auto& r : labels.value("round2", Json::array()))
      require(parse_mi_label(r.at("label").get<std::string>()).has_value(), "bad round2 label");
    for (const auto& l : labels.at("round2_preference"))
      require(parse_mi_label(l.get<std::string>()).has_value(), "bad round2_preference label");
    for (const auto& r : table.at("tom").at("intents"))
      require(parse_mi_process(r.at("intent").get<std::string>()).has_value(), "bad tom intent");
    for (const char* lang : {"en", "ko"}) {
      for (SlotId s : canonical_slot_order())
        require(!table.at("questions").at(lang).at(to_string(s)).empty(), "empty question bank");
      (void)table.at("draft").at(lang).at("default_topic").get<std::string>();
      require(table.at("baseline").at(lang).is_array(), "baseline must be a list");
    }
    for (const auto& [label, tags] : table.at("strategy").at("focus").items()) {
      require(parse_mi_label(label).has_value(), "bad strategy label");
      for (const auto& t : tags) require(parse_focus_tag(t.get<std::string>()).has_value(), "bad focus tag");
    }
  } catch (const Json::exception& e) {
    throw RuleTableInvalid(std::string("malformed rule table: ") + e.what());
  }
  require(mock.error_terms_.size() == kCognitiveErrorCount, "cognitive_error must cover all four categories");
  return mock;
}

std::string MockBackend::generate(const BackendRequest& req) {
  const Json& v = req.vars;
  switch (req.kind) {
    case PromptKind::CognitiveError: return cognitive_errors(v).dump();
    case PromptKind::PppppiAlign: return align(v).dump();
    case PromptKind::Tom: return tom(v).dump();
    case PromptKind::TurnHistory: return turn_history(v).dump();
    case PromptKind::PppppiUpdate: return pppppi_update(v).dump();
    case PromptKind::SummaryUpdate: return summary_update(v).dump();
    case PromptKind::LabelRound1: return label(v, false).dump();
    case PromptKind::LabelRound2: return label(v, true).dump();
    case PromptKind::StrategyGen: return strategy(v).dump();
    case PromptKind::QuestionIdeation: return ideation(v).dump();
    case PromptKind::Draft: return draft(v);
    case PromptKind::Critic: return critic(v).dump();
    case PromptKind::BaselineCounselor: return baseline(v);
  }
  return "{}";
}

Json MockBackend::cognitive_errors(const Json& vars) const {
  const std::string u = str_var(vars, "utterance");
  CognitiveErrorReport report;
  for (CognitiveError e : all_cognitive_errors()) {
    CognitiveErrorFlag flag{e, false, {}};
    auto it = error_terms_.find(e);
    if (it != error_terms_.end()) {
      for (const auto& term : it->second) {
        for (std::size_t hit : text::find_term(u, term)) push_unique(flag.spans, u.substr(hit, term.size()));
      }
    }
    flag.present = !flag.spans.empty();
    report.flags.push_back(std::move(flag));
  }
  return to_json(report);
}

Json MockBackend::align(const Json& vars) const {
  const std::string u = str_var(vars, "utterance");
  PppppiSpans spans;
  for (SlotId s : canonical_slot_order()) {
    auto it = slot_cues_.find(s);
    if (it == slot_cues_.end()) continue;
    for (const auto& cue : it->second)
      for (auto& span : cue_spans(u, cue.term, cue.extend_words)) push_unique(spans[s], span);
  }
  if (auto ce = vars.find("cognitive_errors"); ce != vars.end()) {
    const Json& flags = ce->is_object() && ce->contains("cognitive_errors") ? ce->at("cognitive_errors") : *ce;
    if (flags.is_array()) {
      for (const auto& f : flags) {
        if (!f.value("present", false)) continue;
        for (const auto& sp : f.value("spans", Json::array())) {
          const auto s = sp.get<std::string>();
          if (u.find(s) != std::string::npos) push_unique(spans[SlotId::Perpetuating], s);
        }
      }
    }
  }
  for (auto& list : spans.by_slot) {
    std::vector<std::string> kept;
    for (const auto& s : list) {
      const bool inside = std::any_of(list.begin(), list.end(), [&](const std::string& o) {
        return o.size() > s.size() && o.find(s) != std::string::npos;
      });
      if (!inside) kept.push_back(s);
    }
    list = std::move(kept);
  }
  return to_json(spans);
}

Json MockBackend::tom(const Json& vars) const {
  const std::string u = text::lower_ascii(last_user_text(vars.value("recent_turns", Json::array())));
  const auto& rules = table_.at("tom");
  TomState t;
  for (const auto& r : rules.at("beliefs"))
    if (any_term(u, r.at("match"))) push_unique(t.beliefs, r.at("phrase").get<std::string>());
  for (const auto& r : rules.at("desires"))
    if (any_term(u, r.at("match"))) push_unique(t.desires, r.at("phrase").get<std::string>());
  for (const auto& r : rules.at("intents")) {
    if (any_term(u, r.at("match"))) {
      t.intent_label = *parse_mi_process(r.at("intent").get<std::string>());
      break;
    }
  }
  t.intentions.push_back(to_string(t.intent_label) + ": " + intention_for(t.intent_label));
  return Json{{"tom_state", to_json(t)}};
}

std::vector<std::string> MockBackend::keywords(const std::string& utterance) const {
  std::vector<std::string> out;
  std::string first;
  for (const auto& tok : text::tokenize_whitespace(utterance)) {
    std::string w = strip_token(tok);
    if (w.empty()) continue;
    if (!has_non_ascii(w)) w = text::lower_ascii(w);
    if (first.empty()) first = w;
    const bool stop = std::find(stopwords_.begin(), stopwords_.end(), w) != stopwords_.end();
    const bool long_enough = has_non_ascii(w) ? text::decode_utf8(w).size() >= 2 : w.size() >= 3;
    if (!stop && long_enough) push_unique(out, w);
    if (out.size() == 5) break;
  }
  if (out.empty() && !first.empty()) out.push_back(first);
  return out;
}

Json MockBackend::turn_history(const Json& vars) const {
  const std::string u = str_var(vars, "utterance");
  const std::string lang = lang_of(vars);
  const auto& rules = table_.at("turn_history");
  TurnRecord r;
  r.keywords = keywords(u);
  for (const auto& ev : rules.at("events")) {
    if (text::contains_term(u, ev.at("match").get<std::string>())) {
      r.events.push_back({ev.at("event").get<std::string>(), ev.at("context").get<std::string>(),
                          *parse_impact_level(ev.at("impact_level").get<std::string>())});
    }
  }
  for (const auto& em : rules.at("emotions")) {
    if (!text::contains_term(u, em.at("match").get<std::string>())) continue;
    const auto name = em.at("emotion").get<std::string>();
    const bool seen = std::any_of(r.emotions.begin(), r.emotions.end(),
                                  [&](const EmotionTrigger& e) { return e.emotion == name; });
    if (!seen) r.emotions.push_back({name, em.at("trigger").get<std::string>()});
  }
  std::vector<std::string> head(r.keywords.begin(), r.keywords.begin() + std::min<std::size_t>(2, r.keywords.size()));
  if (head.empty()) {
    r.summary = lang == "ko" ? "사용자가 짧게 답함." : "The user gives a brief reply.";
  } else if (lang == "ko") {
    r.summary = "사용자가 " + join(head, ", ") + "에 대해 이야기함.";
  } else {
    r.summary = "The user talks about " + join(head, " and ") + ".";
  }
  return to_json(r);
}

Json MockBackend::pppppi_update(const Json& vars) const {
  PppppiAnalysis current;
  parse(vars.at("current_analysis"), "current_analysis", current);
  PppppiSpans spans;
  parse(vars.at("pppppi_spans"), "pppppi_spans", spans);
  PppppiAnalysis next = current;
  for (SlotId s : canonical_slot_order()) {
    PppppiEntry& e = next[s];
    e.changed = false;
    std::vector<std::string> fresh;
    for (const auto& sp : spans[s])
      if (std::find(e.evidence.begin(), e.evidence.end(), sp) == e.evidence.end()) fresh.push_back(sp);
    if (fresh.empty()) continue;
    e.text = e.text.empty() ? join(fresh, "; ") : e.text + "; " + join(fresh, "; ");
    e.evidence.insert(e.evidence.end(), fresh.begin(), fresh.end());
    e.is_inferred = false;
    e.changed = true;
  }
  return to_json(next);
}

Json MockBackend::summary_update(const Json& vars) const {
  SummaryText prior;
  if (auto it = vars.find("current_summary"); it != vars.end() && !it->is_null()) parse(*it, "current_summary", prior);
  TurnRecord record;
  parse(vars.at("turn_record"), "turn_record", record);
  SummaryText next;
  const auto prior_sentences = text::split_sentences(prior.core_narrative);
  std::string head = prior_sentences.empty() ? std::string{} : std::string(prior_sentences.front().view(prior.core_narrative));
  if (head.empty() || head == record.summary) {
    next.core_narrative = record.summary.empty() ? prior.core_narrative : record.summary;
  } else {
    next.core_narrative = head + " " + record.summary;
  }
  for (const auto& e : record.emotions) push_unique(next.core_emotion, e.emotion);
  for (const auto& e : prior.core_emotion) push_unique(next.core_emotion, e);
  if (next.core_emotion.size() > 3) next.core_emotion.resize(3);
  next.recurring_themes = prior.recurring_themes;
  if (!record.events.empty()) {
    push_unique(next.recurring_themes, record.events.front().event);
  } else if (!record.keywords.empty()) {
    push_unique(next.recurring_themes, record.keywords.front());
  }
  if (next.recurring_themes.size() > 5)
    next.recurring_themes.erase(next.recurring_themes.begin(), next.recurring_themes.end() - 5);
  return to_json(next);
}

namespace {

std::string label_rationale(MiLabel chosen, const std::string& lang) {
  return lang == "ko" ? "사용자의 최근 발화에 맞추어 " + to_string(chosen) + " 방식이 적절함."
                      : to_string(chosen) + " fits the user's latest turn.";
}

}  // namespace

Json MockBackend::label(const Json& vars, bool second_round) const {
  const std::string u = text::lower_ascii(str_var(vars, "utterance"));
  const std::string lang = lang_of(vars);
  const auto& rules = table_.at("labels");
  MiLabel chosen = *parse_mi_label(rules.at("round1_default").get<std::string>());
  if (second_round) {
    std::vector<std::string> excluded;
    for (const auto& x : vars.value("excluded_labels", Json::array())) excluded.push_back(x.get<std::string>());
    auto allowed = [&](const std::string& name) {
      return std::find(excluded.begin(), excluded.end(), name) == excluded.end();
    };
    for (const auto& r : rules.value("round2", Json::array())) {
      const auto name = r.at("label").get<std::string>();
      if (any_term(u, r.at("match")) && allowed(name)) {
        chosen = *parse_mi_label(name);
        return to_json(LabelPrediction{chosen, label_rationale(chosen, lang)});
      }
    }
    for (const auto& pref : rules.at("round2_preference")) {
      const auto name = pref.get<std::string>();
      if (std::find(excluded.begin(), excluded.end(), name) == excluded.end()) {
        chosen = *parse_mi_label(name);
        break;
      }
    }
  } else {
    for (const auto& r : rules.at("round1")) {
      if (any_term(u, r.at("match"))) {
        chosen = *parse_mi_label(r.at("label").get<std::string>());
        break;
      }
    }
  }
  return to_json(LabelPrediction{chosen, label_rationale(chosen, lang)});
}

Json MockBackend::strategy(const Json& vars) const {
  const auto& rules = table_.at("strategy");
  std::vector<MiLabel> acts;
  for (const char* key : {"primary", "secondary"}) {
    auto it = vars.find(key);
    if (it == vars.end() || it->is_null()) continue;
    auto l = parse_mi_label(it->at("label").get<std::string>());
    if (l && std::find(acts.begin(), acts.end(), *l) == acts.end()) acts.push_back(*l);
  }
  if (acts.empty()) acts.push_back(MiLabel::General);
  StrategyPlan plan;
  plan.speech_acts = acts;
  for (MiLabel a : acts) {
    const std::string name = to_string(a);
    plan.goals.push_back({a, "Use " + name + " to keep the exploration grounded in the user's words."});
    ActPlan ap;
    ap.act = a;
    for (const auto& t : rules.at("focus").at(name)) ap.focus.push_back(*parse_focus_tag(t.get<std::string>()));
    for (const auto& k : rules.at("key_points").at(name)) ap.key_points.push_back(k.get<std::string>());
    for (const auto& h : rules.at("style_hints")) ap.style_hints.push_back(h.get<std::string>());
    plan.act_plans.push_back(std::move(ap));
  }
  return to_json(plan);
}

std::string MockBackend::bank_question(const std::string& lang, SlotId slot,
                                       const std::vector<std::string>& asked) const {
  const auto& bank = table_.at("questions").at(lang).at(to_string(slot));
  for (const auto& q : bank) {
    const auto s = q.get<std::string>();
    if (std::find(asked.begin(), asked.end(), s) == asked.end()) return s;
  }
  return bank.back().get<std::string>();
}

Json MockBackend::ideation(const Json& vars) const {
  const std::string lang = lang_of(vars);
  std::vector<std::string> asked;
  for (const auto& q : vars.value("asked_questions", Json::array())) asked.push_back(q.get<std::string>());
  CandidateList list;
  int rank = 0;
  for (const auto& item : vars.value("top_slots", Json::array())) {
    auto slot = parse_slot(item.at("slot").get<std::string>());
    if (!slot) continue;
    CandidateQuestion c;
    c.slot = *slot;
    c.intent = to_string(*slot) + "-detail";
    c.question = bank_question(lang, *slot, asked);
    c.why = "gap " + format_score(item.value("score", 0.0)) + " on " + to_string(*slot);
    c.confidence = std::max(0.1, 0.9 - 0.1 * rank++);
    list.candidates.push_back(std::move(c));
  }
  return to_json(list);
}

std::string MockBackend::draft(const Json& vars) const {
  const std::string lang = lang_of(vars);
  const auto& tpl = table_.at("draft").at(lang);
  StrategyPlan plan;
  parse(vars.at("plan"), "plan", plan);
  std::string topic = tpl.at("default_topic").get<std::string>();
  std::string emotion = tpl.at("default_emotion").get<std::string>();
  const Json records = vars.value("recent_records", Json::array());
  if (!records.empty()) {
    const auto& last = records.back();
    if (!last.value("events", Json::array()).empty()) {
      topic = last.at("events").front().at("event").get<std::string>();
    } else if (!last.value("keywords", Json::array()).empty()) {
      topic = last.at("keywords").front().get<std::string>();
    }
    if (!last.value("emotions", Json::array()).empty())
      emotion = last.at("emotions").front().at("emotion").get<std::string>();
  }
  std::vector<std::string> statements;
  std::vector<std::string> questions;
  for (MiLabel act : plan.speech_acts) {
    const std::string name = to_string(act);
    if (act == MiLabel::OpenQuestion) {
      const Json cands = vars.value("candidates", Json::array());
      questions.push_back(cands.empty() ? tpl.at(name).get<std::string>() : cands.front().at("question").get<std::string>());
    } else if (act == MiLabel::ClosedQuestion) {
      questions.push_back(tpl.at(name).get<std::string>());
    } else {
      statements.push_back(replace_all(replace_all(tpl.at(name).get<std::string>(), "{topic}", topic), "{emotion}", emotion));
    }
  }
  statements.insert(statements.end(), questions.begin(), questions.end());
  return join(statements, " ");
}

Json MockBackend::critic(const Json& vars) const {
  const std::string lang = lang_of(vars);
  const std::string draft_text = str_var(vars, "draft");
  const double threshold = table_.at("critic").value("add_threshold", 0.55);
  std::vector<std::string> asked;
  for (const auto& t : vars.value("recent_agent_turns", Json::array()))
    for (auto& q : question_sentences(t.get<std::string>())) push_unique(asked, text::trim(q));
  std::vector<CandidateQuestion> pool;
  for (const auto& c : vars.value("candidates", Json::array())) {
    CandidateQuestion cq;
    parse(c, "candidates", cq);
    pool.push_back(std::move(cq));
  }
  auto fresh = [&](const std::string& q) { return std::find(asked.begin(), asked.end(), text::trim(q)) == asked.end(); };

  CriticDecision d;
  const auto qs = question_sentences(draft_text);
  if (qs.size() > 1) {
    d.verdict = Verdict::NeedsFix;
    d.rationale = "The draft asks more than one question.";
    d.question_op.action = QuestionAction::Replace;
    d.question_op.text = text::trim(qs.front());
    for (const auto& c : pool) {
      if (fresh(c.question)) {
        d.question_op.text = c.question;
        d.question_op.slot = c.slot;
        break;
      }
    }
    d.question_op.why = {"multiple_questions"};
    return to_json(d);
  }
  if (qs.size() == 1 && !fresh(qs.front())) {
    d.verdict = Verdict::NeedsFix;
    d.question_op.why = {"redundant"};
    for (const auto& c : pool) {
      if (fresh(c.question) && text::trim(c.question) != text::trim(qs.front())) {
        d.rationale = "The question repeats an earlier one; a fresh candidate fits better.";
        d.question_op.action = QuestionAction::Replace;
        d.question_op.text = c.question;
        d.question_op.slot = c.slot;
        return to_json(d);
      }
    }
    d.rationale = "The question repeats an earlier one and no fresh candidate is available.";
    d.question_op.action = QuestionAction::Remove;
    return to_json(d);
  }
  const Json gaps = vars.value("top_gaps", Json::array());
  if (qs.empty() && !gaps.empty() && gaps.front().value("score", 0.0) >= threshold) {
    const auto top = *parse_slot(gaps.front().at("slot").get<std::string>());
    d.verdict = Verdict::NeedsFix;
    d.rationale = "No question while the " + to_string(top) + " slot is still under-specified.";
    d.question_op.action = QuestionAction::Add;
    d.question_op.slot = top;
    d.question_op.why = {"missing_question", "gap"};
    for (const auto& c : pool) {
      if (c.slot == top && fresh(c.question)) {
        d.question_op.text = c.question;
        return to_json(d);
      }
    }
    d.question_op.text = bank_question(lang, top, asked);
    return to_json(d);
  }
  d.verdict = Verdict::Ok;
  d.rationale = qs.empty() ? "The draft needs no question at this point." : "The question is novel and fits the context.";
  d.question_op.action = QuestionAction::Keep;
  return to_json(d);
}

std::string MockBackend::baseline(const Json& vars) const {
  const std::string lang = lang_of(vars);
  const auto kws = keywords(str_var(vars, "utterance"));
  const std::string topic = kws.empty() ? table_.at("draft").at(lang).at("default_topic").get<std::string>() : kws.front();
  std::vector<std::string> parts;
  for (const auto& s : table_.at("baseline").at(lang)) parts.push_back(replace_all(s.get<std::string>(), "{topic}", topic));
  return join(parts, " ");
}

}  // namespace psyprobe
