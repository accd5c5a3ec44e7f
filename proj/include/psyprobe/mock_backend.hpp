#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "psyprobe/gateway.hpp"

namespace psyprobe {

/// Rule-driven stand-in for a language model. Responses depend only on the
/// prompt kind and the template variables, never on the rendered text, so the
/// same context always yields byte-identical output.
class MockBackend final : public Backend {
 public:
  struct SlotCue {
    std::string term;
    int extend_words = 0;
  };

  /// Throws RuleTableInvalid when a section is missing or mistyped.
  static MockBackend from_json(const Json& table);
  static MockBackend from_file(const std::filesystem::path& path);

  std::string generate(const BackendRequest& req) override;

  const Json& table() const { return table_; }

 private:
  explicit MockBackend(Json table);

  Json cognitive_errors(const Json& vars) const;
  Json align(const Json& vars) const;
  Json tom(const Json& vars) const;
  Json turn_history(const Json& vars) const;
  Json pppppi_update(const Json& vars) const;
  Json summary_update(const Json& vars) const;
  Json label(const Json& vars, bool second_round) const;
  Json strategy(const Json& vars) const;
  Json ideation(const Json& vars) const;
  std::string draft(const Json& vars) const;
  Json critic(const Json& vars) const;
  std::string baseline(const Json& vars) const;

  std::vector<std::string> keywords(const std::string& utterance) const;
  std::string bank_question(const std::string& lang, SlotId slot, const std::vector<std::string>& asked) const;

  Json table_;
  std::map<CognitiveError, std::vector<std::string>> error_terms_;
  std::map<SlotId, std::vector<SlotCue>> slot_cues_;
  std::vector<std::string> stopwords_;
};

/// Extracts verbatim spans for `term` from `source`, extending each match
/// by `extend_words` following words. Trailing punctuation is dropped.
std::vector<std::string> cue_spans(const std::string& source, const std::string& term, int extend_words);

}  // namespace psyprobe
