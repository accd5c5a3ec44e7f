#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

#include "psyprobe/engine.hpp"

namespace psyprobe {

struct SessionConfig {
  SessionMode mode = SessionMode::Full;
  std::chrono::milliseconds time_limit = std::chrono::minutes(20);
  std::string language = "ko";
  GatewayConfig backend;

  void validate() const;
};

/// Overlays `doc` (mode, language, time_limit_s, backend) onto `base`.
SessionConfig session_config_from_json(const Json& doc, SessionConfig base = {});
Json to_json(const SessionConfig& c);

struct TurnEntry {
  std::string speaker;  // "user" or "agent"
  std::string text;
  Json stage_artifacts;  // null when absent
  Json memory_snapshot;  // null when absent
  std::string timestamp;

  bool operator==(const TurnEntry&) const = default;
};

Json to_json(const TurnEntry& e);
TurnEntry turn_entry_from_json(const Json& doc, const std::string& path = "");
/// One TurnEntry per line.
std::string to_jsonl(const std::vector<TurnEntry>& entries);
std::vector<TurnEntry> parse_jsonl(const std::string& body);
std::vector<TurnEntry> read_transcript(const std::filesystem::path& path);

/// Mode, language, concern and emotion recorded on the first user entry.
struct SessionHeader {
  SessionMode mode = SessionMode::Full;
  std::string language = "ko";
  std::string concern;
  std::string emotion;
};
std::optional<SessionHeader> session_header(const std::vector<TurnEntry>& entries);

using BackendFactory = std::function<std::shared_ptr<Backend>(const GatewayConfig&)>;
using WallClock = std::function<std::chrono::system_clock::time_point()>;

struct ServiceOptions {
  std::filesystem::path assets_dir;
  std::filesystem::path data_dir;  // empty disables persistence
  EngineConfig engine;
  SessionConfig defaults;
  WallClock clock;          // defaults to system_clock::now
  BackendFactory backends;  // defaults to make_backend over assets_dir
};

class SessionManager {
 public:
  explicit SessionManager(ServiceOptions options);
  ~SessionManager();

  /// Throws InvalidConfig on a blank concern or a bad config.
  std::string create_session(const SessionConfig& config, const std::string& concern, const std::string& emotion);
  /// Runs one turn. Throws UnknownSession, SessionBusy, SessionClosed,
  /// TimeLimitExceeded (and closes the session) or StageError. State is
  /// committed only after the turn is persisted.
  std::string post_message(const std::string& id, const std::string& text);
  /// Memory snapshot plus latest ranking; a copy taken under a short lock.
  Json get_state(const std::string& id) const;
  /// Closes the session and returns the transcript.
  std::vector<TurnEntry> end_session(const std::string& id);
  std::vector<TurnEntry> transcript(const std::string& id) const;
  std::vector<CallLedgerEntry> ledger(const std::string& id) const;
  bool is_closed(const std::string& id) const;

  const ServiceOptions& options() const { return options_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  std::string new_id();
  void persist(const Session& s, const std::vector<TurnEntry>& entries) const;
  std::string timestamp() const;

  ServiceOptions options_;
  std::shared_ptr<const PromptTemplates> templates_;
  std::vector<FewShotExample> store_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<RateLimiter>> limiters_;
  std::mt19937_64 rng_;
};

ServiceOptions default_service_options(const std::filesystem::path& assets_dir);
/// Applies the "session" and "engine" sections of a config document.
void apply_config(ServiceOptions& options, const Json& doc);
Json read_json_file(const std::filesystem::path& path);

}  // namespace psyprobe
