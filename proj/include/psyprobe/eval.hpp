#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "psyprobe/session.hpp"

namespace psyprobe::eval {

using Tokens = std::vector<std::string>;

enum class Tokenizer { Whitespace, Char };
std::optional<Tokenizer> parse_tokenizer(std::string_view s);
Tokens tokenize(std::string_view s, Tokenizer t);

/// N-gram overlap F1. Zero when either side has no n-grams.
double rouge_n(const Tokens& candidate, const Tokens& reference, int n);
/// LCS-based F1.
double rouge_l(const Tokens& candidate, const Tokens& reference);
/// Cumulative BLEU-1..max_n with clipped counts and the brevity penalty
/// against the closest reference length. Without smoothing an order with
/// zero matches yields 0 from that order on; with smoothing orders above 1
/// use add-one counts.
std::vector<double> bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_n = 4,
                         bool smoothing = false);

/// Fraction of agent turns holding at least one question sentence.
double question_rate(const std::vector<std::string>& agent_turns);
double question_rate(const std::vector<TurnEntry>& transcript);

struct MetricRow {
  std::string mode;
  double r1 = 0, r2 = 0, rl = 0;
  double b1 = 0, b2 = 0, b3 = 0, b4 = 0;
  double question_rate = 0;
  std::size_t pairs = 0;
};

struct TurnFailure {
  std::string transcript;
  std::string mode;
  int turn_index = 0;
  std::string stage;
  std::string code;
  std::string message;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  std::vector<TurnFailure> failures;
  std::vector<std::string> notes;

  /// Aligned columns: Mode, R-1, R-2, R-L, B-1..B-4, QR, N.
  std::string table() const;
};

Json to_json(const MetricRow& r);
Json to_json(const MetricReport& r);

struct ScoreOptions {
  Tokenizer tokenizer = Tokenizer::Whitespace;
  bool smoothing = false;
};

/// Averages every metric over aligned candidate/reference pairs.
MetricRow score_pairs(const std::string& mode, const std::vector<std::string>& candidates,
                      const std::vector<std::string>& references, const ScoreOptions& options = {});

/// Engine wiring shared by ablation and replay.
struct Runner {
  std::filesystem::path assets_dir;
  GatewayConfig backend;  // mock unless overridden
  EngineConfig engine;
  BackendFactory backends;  // defaults to make_backend over assets_dir
};

/// Regenerates every user turn of every transcript in `dir` under each mode,
/// teacher-forced on the stored human history, and scores against the stored
/// agent reply at the same position. User turns without a following agent
/// reply are skipped.
MetricReport run_ablation(const std::filesystem::path& dir, const std::vector<SessionMode>& modes,
                          const Runner& runner, const ScoreOptions& options = {});

/// Re-runs a recorded session from its user turns, feeding back the replies
/// it produces. Returns the regenerated transcript.
std::vector<TurnEntry> replay(const std::vector<TurnEntry>& transcript, const Runner& runner);

}  // namespace psyprobe::eval
