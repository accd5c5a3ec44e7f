#include "psyprobe/strategy_planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace psyprobe {

namespace {

bool is_question(MiLabel l) { return l == MiLabel::OpenQuestion || l == MiLabel::ClosedQuestion; }
bool is_reflection(MiLabel l) { return l == MiLabel::SimpleReflection || l == MiLabel::ComplexReflection; }

std::map<std::string, int> bag(const std::string& s) {
  std::map<std::string, int> out;
  for (const auto& t : text::tokenize_whitespace(text::lower_ascii(s))) ++out[t];
  return out;
}

Json examples_json(const std::vector<FewShotExample>& examples) {
  Json out = Json::array();
  for (const auto& e : examples) out.push_back(to_json(e));
  return out;
}

}  // namespace

std::vector<MiLabel> exclusion_set(MiLabel first) {
  std::vector<MiLabel> out;
  for (MiLabel l : all_mi_labels()) {
    if (l == first || (is_question(first) && is_question(l)) || (is_reflection(first) && is_reflection(l)))
      out.push_back(l);
  }
  return out;
}

bool is_excluded(MiLabel candidate, MiLabel first) {
  const auto ex = exclusion_set(first);
  return std::find(ex.begin(), ex.end(), candidate) != ex.end();
}

double token_overlap_cosine(const std::string& a, const std::string& b) {
  const auto x = bag(a);
  const auto y = bag(b);
  if (x.empty() || y.empty()) return 0.0;
  double dot = 0.0;
  for (const auto& [tok, n] : x) {
    auto it = y.find(tok);
    if (it != y.end()) dot += static_cast<double>(n) * it->second;
  }
  auto norm = [](const std::map<std::string, int>& m) {
    double s = 0.0;
    for (const auto& [tok, n] : m) s += static_cast<double>(n) * n;
    return std::sqrt(s);
  };
  return dot / (norm(x) * norm(y));
}

std::vector<FewShotExample> retrieve_fewshot(const std::string& utterance, const std::vector<FewShotExample>& store,
                                             std::size_t k, const SimilarityScorer& scorer) {
  if (store.empty()) throw EmptyStore("few-shot store has no examples");
  if (k < 1) throw PreconditionViolation("k must be at least 1");
  std::vector<double> scores(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) scores[i] = scorer(utterance, store[i].client_utterance);
  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<FewShotExample> out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) out.push_back(store[order[i]]);
  return out;
}

std::vector<FewShotExample> load_fewshot_store(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open few-shot store " + path.string());
  std::vector<FewShotExample> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (text::is_blank(line)) continue;
    Json doc = Json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw SchemaViolation("line " + std::to_string(n), "not valid JSON");
    FewShotExample e;
    parse(doc, "line " + std::to_string(n), e);
    out.push_back(std::move(e));
  }
  return out;
}

LabelPair StrategyPlanner::predict_labels(const std::string& utterance, const std::vector<DialogueTurn>& recent_turns,
                                          const std::vector<FewShotExample>& examples, int turn_index) const {
  const Json turns = to_json(recent_turns);
  const LabelPrediction first = gateway_.complete<LabelPrediction>(
      {PromptKind::LabelRound1,
       {{"utterance", utterance}, {"recent_turns", turns}, {"examples", examples_json(examples)}, {"language", language_}},
       turn_index});

  std::vector<FewShotExample> remaining;
  std::copy_if(examples.begin(), examples.end(), std::back_inserter(remaining),
               [&](const FewShotExample& e) { return !is_excluded(e.label, first.label); });
  Json excluded = Json::array();
  for (MiLabel l : exclusion_set(first.label)) excluded.push_back(to_string(l));

  Contract<LabelPrediction> contract;
  contract.check = [&](const LabelPrediction& p) {
    if (is_excluded(p.label, first.label))
      throw SchemaViolation("label", "excluded label '" + to_string(p.label) + "' after round-one '" +
                                         to_string(first.label) + "'");
  };
  try {
    LabelPrediction second = gateway_.complete<LabelPrediction>({PromptKind::LabelRound2,
                                                                 {{"utterance", utterance},
                                                                  {"recent_turns", turns},
                                                                  {"examples", examples_json(remaining)},
                                                                  {"first_label", to_json(first)},
                                                                  {"excluded_labels", excluded},
                                                                  {"language", language_}},
                                                                 turn_index},
                                                                contract);
    return {first, std::move(second)};
  } catch (const MalformedAfterRetries& e) {
    if (e.last_violation().path() == "label" && e.last_violation().reason().rfind("excluded", 0) == 0)
      throw ExclusionViolation(e.last_violation().reason());
    throw;
  }
}

StrategyPlan StrategyPlanner::generate_strategy(const LabelPair& labels, const std::string& utterance,
                                                const TomState& tom, const OverallSummary& summary,
                                                int turn_index) const {
  if (is_excluded(labels.second.label, labels.first.label))
    throw PreconditionViolation("label pair violates the exclusion rule");
  return gateway_.complete<StrategyPlan>({PromptKind::StrategyGen,
                                          {{"primary", to_json(labels.first)},
                                           {"secondary", to_json(labels.second)},
                                           {"utterance", utterance},
                                           {"tom_state", to_json(tom)},
                                           {"summary", to_json(summary)},
                                           {"language", language_}},
                                          turn_index});
}

}  // namespace psyprobe
