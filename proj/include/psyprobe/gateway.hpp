#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "psyprobe/domain.hpp"
#include "psyprobe/text.hpp"

namespace psyprobe {

/// One member per prompted stage, plus the single-call baseline.
enum class PromptKind {
  CognitiveError,
  PppppiAlign,
  Tom,
  TurnHistory,
  PppppiUpdate,
  SummaryUpdate,
  LabelRound1,
  LabelRound2,
  StrategyGen,
  QuestionIdeation,
  Draft,
  Critic,
  BaselineCounselor
};
inline constexpr std::size_t kPromptKindCount = 13;

std::span<const PromptKind, kPromptKindCount> all_prompt_kinds();
std::string to_string(PromptKind k);
std::optional<PromptKind> parse_prompt_kind(std::string_view s);
/// Draft and BaselineCounselor return plain text; all others return JSON.
bool is_text_kind(PromptKind k);

enum class BackendKind { HttpProvider, Mock };

struct KindSettings {
  double temperature = 0.0;
  /// Ask for a reasoning block before the answer; it is stripped before parsing.
  bool reasoning_preamble = false;
};

struct GatewayConfig {
  BackendKind backend = BackendKind::Mock;
  std::string model_name = "mock";
  int max_retries = 2;
  std::chrono::milliseconds timeout{60'000};
  int rate_limit_per_minute = 0;  // 0 disables limiting
  std::string base_url = "https://api.openai.com";
  std::string endpoint = "/v1/chat/completions";
  std::map<PromptKind, KindSettings> per_kind;

  KindSettings settings_for(PromptKind k) const;
  void validate() const;
};

GatewayConfig gateway_config_from_json(const Json& doc);
Json to_json(const GatewayConfig& c);

struct CallLedgerEntry {
  PromptKind kind = PromptKind::CognitiveError;
  int turn_index = 0;
  std::string rendered_prompt;
  std::string raw_response;  // last raw response received
  int attempts = 0;
  std::string outcome;  // "ok" or the error code
};

Json to_json(const CallLedgerEntry& e);

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

struct BackendRequest {
  PromptKind kind;
  const std::string& prompt;
  const Json& vars;
  const std::string& model;
  double temperature;
  int attempt;  // 1-based
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Returns the raw model output. Transport failures throw BackendUnavailable.
  virtual std::string generate(const BackendRequest& req) = 0;
};

/// Adapts a callable; used by tests to script adversarial outputs.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<std::string(const BackendRequest&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}
  std::string generate(const BackendRequest& req) override { return fn_(req); }

 private:
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Prompt templates: UTF-8 text with {{variable}} placeholders, one per kind.
// ---------------------------------------------------------------------------

class PromptTemplates {
 public:
  PromptTemplates() = default;

  /// Loads `<dir>/<kind>.txt` for every PromptKind; all must exist.
  static PromptTemplates load(const std::filesystem::path& dir);

  void set(PromptKind kind, std::string body);
  bool has(PromptKind kind) const { return bodies_.count(kind) > 0; }
  const std::string& body(PromptKind kind) const;
  /// Placeholder names in order of first appearance.
  std::vector<std::string> variables(PromptKind kind) const;
  /// Strings are substituted verbatim, other JSON values as compact JSON.
  /// An unbound placeholder throws TemplateError.
  std::string render(PromptKind kind, const Json& vars) const;

 private:
  std::map<PromptKind, std::string> bodies_;
};

/// Strips reasoning blocks and code fences from a raw response. For JSON
/// kinds also trims text around the outermost object.
std::string clean_response(std::string_view raw, bool expect_json);

// ---------------------------------------------------------------------------
// Rate limiting
// ---------------------------------------------------------------------------

/// Sliding one-minute window. acquire() blocks (via the sleeper) until a slot
/// is free, serializing dispatch once the limit is reached.
class RateLimiter {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;
  using Sleeper = std::function<void(std::chrono::steady_clock::duration)>;

  explicit RateLimiter(int per_minute, Clock clock = {}, Sleeper sleeper = {});

  /// Returns how long the caller waited.
  std::chrono::steady_clock::duration acquire();

 private:
  int per_minute_;
  Clock clock_;
  Sleeper sleeper_;
  std::mutex mu_;
  std::vector<std::chrono::steady_clock::time_point> window_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct Call {
  PromptKind kind;
  Json vars;
  int turn_index = 0;
};

/// Stage-specific acceptance rules layered over schema validation.
template <class T>
struct Contract {
  /// Throws SchemaViolation for a retryable breach.
  std::function<void(const T&)> check;
  /// Called when retries are exhausted and the last output was schema-valid
  /// but failed `check`; returns a repaired value instead of failing.
  std::function<T(T, const SchemaViolation&)> on_exhausted;
};

class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<Backend> backend, std::shared_ptr<const PromptTemplates> templates,
          std::shared_ptr<RateLimiter> limiter = nullptr);

  const GatewayConfig& config() const { return config_; }

  /// Renders, calls the backend, parses and validates. Schema violations are
  /// fed back into the prompt and retried up to max_retries times. Exactly one
  /// ledger entry is appended per call, whatever the outcome.
  template <class T>
  T complete(const Call& call, const Contract<T>& contract = {}) {
    std::optional<T> result;
    std::optional<T> last_schema_valid;
    const bool json_kind = !is_text_kind(call.kind);
    run(
        call,
        [&](const std::string& raw) {
          last_schema_valid.reset();
          T value = decode<T>(clean_response(raw, json_kind));
          if (contract.check) {
            last_schema_valid = value;
            contract.check(value);
          }
          result = std::move(value);
        },
        [&](const SchemaViolation& last) {
          if (!contract.on_exhausted || !last_schema_valid) return false;
          result = contract.on_exhausted(std::move(*last_schema_valid), last);
          return true;
        });
    return std::move(*result);
  }

  /// Snapshot of all calls in issue order.
  std::vector<CallLedgerEntry> ledger() const;
  std::size_t ledger_size() const;

 private:
  template <class T>
  static T decode(const std::string& cleaned) {
    if constexpr (std::is_same_v<T, TextResponse>) {
      if (text::is_blank(cleaned)) throw SchemaViolation("$", "empty response");
      return TextResponse{cleaned};
    } else {
      return validate_text<T>(cleaned);
    }
  }

  void run(const Call& call, const std::function<void(const std::string&)>& accept,
           const std::function<bool(const SchemaViolation&)>& exhausted);

  GatewayConfig config_;
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<const PromptTemplates> templates_;
  std::shared_ptr<RateLimiter> limiter_;
  mutable std::mutex ledger_mu_;
  std::vector<CallLedgerEntry> ledger_;
};

}  // namespace psyprobe
