#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "psyprobe/gateway.hpp"

namespace psyprobe {

/// Labels barred from the second round: both subtypes of a question or a
/// reflection, otherwise only the first label. Returned in enum order.
std::vector<MiLabel> exclusion_set(MiLabel first);
bool is_excluded(MiLabel candidate, MiLabel first);

using SimilarityScorer = std::function<double(const std::string&, const std::string&)>;

/// Cosine similarity of lower-cased whitespace token count vectors.
double token_overlap_cosine(const std::string& a, const std::string& b);

/// Top-k examples by similarity to `utterance`; ties go to the lower store
/// index. Throws EmptyStore on an empty store.
std::vector<FewShotExample> retrieve_fewshot(const std::string& utterance, const std::vector<FewShotExample>& store,
                                             std::size_t k = 3, const SimilarityScorer& scorer = token_overlap_cosine);

/// One JSON object per line; blank lines are skipped.
std::vector<FewShotExample> load_fewshot_store(const std::filesystem::path& path);

using LabelPair = std::pair<LabelPrediction, LabelPrediction>;

class StrategyPlanner {
 public:
  explicit StrategyPlanner(Gateway& gateway, std::string language = "ko")
      : gateway_(gateway), language_(std::move(language)) {}

  /// Two rounds; the second rejects labels in exclusion_set(first) and is
  /// retried, then fails with ExclusionViolation.
  LabelPair predict_labels(const std::string& utterance, const std::vector<DialogueTurn>& recent_turns,
                           const std::vector<FewShotExample>& examples, int turn_index = 0) const;

  StrategyPlan generate_strategy(const LabelPair& labels, const std::string& utterance, const TomState& tom,
                                 const OverallSummary& summary, int turn_index = 0) const;

 private:
  Gateway& gateway_;
  std::string language_;
};

}  // namespace psyprobe
