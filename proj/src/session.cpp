#include "psyprobe/session.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "psyprobe/http_backend.hpp"

namespace psyprobe {

struct SessionManager::Session {
  std::string id;
  SessionConfig config;
  std::string concern;
  std::string emotion;
  std::chrono::system_clock::time_point started_at;
  std::shared_ptr<Gateway> gateway;
  std::unique_ptr<Engine> engine;

  std::mutex turn_mu;
  mutable std::mutex view_mu;
  MemoryState memory;
  std::vector<TurnEntry> transcript;
  std::optional<GapRanking> ranking;
  bool closed = false;
};

void SessionConfig::validate() const {
  if (time_limit.count() <= 0) throw InvalidConfig("time_limit must be positive");
  if (language.empty()) throw InvalidConfig("language must not be empty");
  backend.validate();
}

SessionConfig session_config_from_json(const Json& doc, SessionConfig c) {
  if (doc.is_null()) return c;
  if (!doc.is_object()) throw InvalidConfig("session config must be an object");
  try {
    if (doc.contains("mode")) {
      const auto name = doc.at("mode").get<std::string>();
      auto mode = parse_session_mode(name);
      if (!mode) throw InvalidConfig("unknown mode '" + name + "'");
      c.mode = *mode;
    }
    c.language = doc.value("language", c.language);
    if (doc.contains("time_limit_s"))
      c.time_limit = std::chrono::milliseconds(static_cast<long long>(doc.at("time_limit_s").get<double>() * 1000.0));
    if (doc.contains("backend")) c.backend = gateway_config_from_json(doc.at("backend"));
  } catch (const Json::exception& e) {
    throw InvalidConfig(std::string("session config: ") + e.what());
  }
  c.validate();
  return c;
}

Json to_json(const SessionConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"time_limit_s", static_cast<double>(c.time_limit.count()) / 1000.0},
          {"language", c.language},
          {"backend", to_json(c.backend)}};
}

Json to_json(const TurnEntry& e) {
  Json out = {{"speaker", e.speaker}, {"text", e.text}};
  if (!e.stage_artifacts.is_null()) out["stage_artifacts"] = e.stage_artifacts;
  if (!e.memory_snapshot.is_null()) out["memory_snapshot"] = e.memory_snapshot;
  out["timestamp"] = e.timestamp;
  return out;
}

TurnEntry turn_entry_from_json(const Json& doc, const std::string& path) {
  const std::string base = path.empty() ? "" : path + ".";
  if (!doc.is_object()) throw SchemaViolation(path.empty() ? "$" : path, "expected an object");
  TurnEntry e;
  if (!doc.contains("speaker") || !doc.at("speaker").is_string()) throw SchemaViolation(base + "speaker", "expected a string");
  e.speaker = doc.at("speaker").get<std::string>();
  if (e.speaker != "user" && e.speaker != "agent") throw SchemaViolation(base + "speaker", "must be user or agent");
  if (!doc.contains("text") || !doc.at("text").is_string()) throw SchemaViolation(base + "text", "expected a string");
  e.text = doc.at("text").get<std::string>();
  e.stage_artifacts = doc.value("stage_artifacts", Json());
  e.memory_snapshot = doc.value("memory_snapshot", Json());
  e.timestamp = doc.value("timestamp", std::string{});
  return e;
}

std::string to_jsonl(const std::vector<TurnEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += to_json(e).dump() + "\n";
  return out;
}

std::vector<TurnEntry> parse_jsonl(const std::string& body) {
  std::vector<TurnEntry> out;
  std::istringstream in(body);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (text::is_blank(line)) continue;
    Json doc = Json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw SchemaViolation("line " + std::to_string(n), "not valid JSON");
    out.push_back(turn_entry_from_json(doc, "line " + std::to_string(n)));
  }
  return out;
}

std::vector<TurnEntry> read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open transcript " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_jsonl(ss.str());
}

std::optional<SessionHeader> session_header(const std::vector<TurnEntry>& entries) {
  for (const auto& e : entries) {
    if (e.speaker != "user") continue;
    if (!e.stage_artifacts.is_object() || !e.stage_artifacts.contains("session")) return std::nullopt;
    const Json& s = e.stage_artifacts.at("session");
    SessionHeader h;
    if (auto m = parse_session_mode(s.value("mode", std::string("full")))) h.mode = *m;
    h.language = s.value("language", h.language);
    h.concern = s.value("concern", std::string{});
    h.emotion = s.value("emotion", std::string{});
    return h;
  }
  return std::nullopt;
}

ServiceOptions default_service_options(const std::filesystem::path& assets_dir) {
  ServiceOptions o;
  o.assets_dir = assets_dir;
  return o;
}

void apply_config(ServiceOptions& options, const Json& doc) {
  if (!doc.is_object()) throw InvalidConfig("config must be an object");
  if (auto it = doc.find("session"); it != doc.end()) options.defaults = session_config_from_json(*it, options.defaults);
  if (auto it = doc.find("engine"); it != doc.end()) options.engine = engine_config_from_json(*it, options.engine);
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidConfig("cannot open " + path.string());
  Json doc = Json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw InvalidConfig(path.string() + " is not valid JSON");
  return doc;
}

SessionManager::SessionManager(ServiceOptions options) : options_(std::move(options)), rng_(std::random_device{}()) {
  if (!options_.clock) options_.clock = [] { return std::chrono::system_clock::now(); };
  if (!options_.backends) {
    const std::string rules = (options_.assets_dir / "mock_rules.json").string();
    options_.backends = [rules](const GatewayConfig& c) { return make_backend(c, rules); };
  }
  options_.engine.validate();
  options_.defaults.validate();
  templates_ = std::make_shared<const PromptTemplates>(PromptTemplates::load(options_.assets_dir / "prompts"));
  store_ = load_fewshot_store(options_.assets_dir / "fewshot.jsonl");
  if (!options_.data_dir.empty()) std::filesystem::create_directories(options_.data_dir);
}

SessionManager::~SessionManager() = default;

std::string SessionManager::new_id() {
  static constexpr char kHex[] = "0123456789abcdef";
  for (;;) {
    std::uint64_t v = rng_();
    std::string id;
    for (int i = 0; i < 16; ++i, v >>= 4) id += kHex[v & 0xF];
    if (!sessions_.count(id)) return id;
  }
}

std::string SessionManager::timestamp() const {
  const auto now = options_.clock();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

std::string SessionManager::create_session(const SessionConfig& config, const std::string& concern,
                                           const std::string& emotion) {
  if (text::is_blank(concern)) throw InvalidConfig("presenting concern must not be empty");
  config.validate();
  auto s = std::make_shared<Session>();
  s->config = config;
  s->concern = concern;
  s->emotion = emotion;
  s->started_at = options_.clock();

  std::shared_ptr<RateLimiter> limiter;
  if (config.backend.rate_limit_per_minute > 0) {
    const std::string key = config.backend.base_url + "|" + config.backend.model_name + "|" +
                            std::to_string(config.backend.rate_limit_per_minute);
    std::lock_guard lock(mu_);
    auto& slot = limiters_[key];
    if (!slot) slot = std::make_shared<RateLimiter>(config.backend.rate_limit_per_minute);
    limiter = slot;
  }
  s->gateway = std::make_shared<Gateway>(config.backend, options_.backends(config.backend), templates_, limiter);
  EngineConfig ec = options_.engine;
  ec.language = config.language;
  s->engine = std::make_unique<Engine>(ec, *s->gateway, store_);

  std::lock_guard lock(mu_);
  s->id = new_id();
  if (!options_.data_dir.empty()) std::ofstream(options_.data_dir / (s->id + ".jsonl"), std::ios::app);
  sessions_[s->id] = s;
  return s->id;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession("unknown session '" + id + "'");
  return it->second;
}

void SessionManager::persist(const Session& s, const std::vector<TurnEntry>& entries) const {
  if (options_.data_dir.empty()) return;
  const auto path = options_.data_dir / (s.id + ".jsonl");
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error("PersistenceError", "cannot append to " + path.string());
  out << to_jsonl(entries);
  out.flush();
  if (!out) throw Error("PersistenceError", "write to " + path.string() + " failed");
}

std::string SessionManager::post_message(const std::string& id, const std::string& text) {
  auto s = find(id);
  std::unique_lock turn(s->turn_mu, std::try_to_lock);
  if (!turn.owns_lock()) throw SessionBusy("session '" + id + "' already has a turn in flight");

  MemoryState memory;
  std::vector<TurnEntry> entries;
  {
    std::lock_guard view(s->view_mu);
    if (s->closed) throw SessionClosed("session '" + id + "' is closed");
    if (options_.clock() - s->started_at >= s->config.time_limit) {
      s->closed = true;
      throw TimeLimitExceeded("session '" + id + "' exceeded its time limit");
    }
    memory = s->memory;
    entries = s->transcript;
  }
  if (text::is_blank(text)) throw PreconditionViolation("message must not be empty");

  TurnInput input;
  input.mode = s->config.mode;
  input.utterance = text;
  input.emotion = s->emotion;
  for (const auto& e : entries) input.history.push_back({e.speaker, e.text});
  if (entries.empty()) input.concern = s->concern;

  TurnOutput out = s->engine->run_turn(input, memory);

  TurnEntry user{"user", text, Json(), Json(), timestamp()};
  if (entries.empty()) {
    user.stage_artifacts = {{"session",
                             {{"concern", s->concern},
                              {"emotion", s->emotion},
                              {"mode", to_string(s->config.mode)},
                              {"language", s->config.language}}}};
  }
  TurnEntry agent{"agent", out.reply, out.artifacts, snapshot(out.memory), timestamp()};
  persist(*s, {user, agent});

  std::lock_guard view(s->view_mu);
  s->memory = std::move(out.memory);
  if (out.ranking) s->ranking = std::move(out.ranking);
  s->transcript.push_back(std::move(user));
  s->transcript.push_back(std::move(agent));
  return s->transcript.back().text;
}

Json SessionManager::get_state(const std::string& id) const {
  auto s = find(id);
  MemoryState memory;
  std::optional<GapRanking> ranking;
  bool closed = false;
  {
    std::lock_guard view(s->view_mu);
    memory = s->memory;
    ranking = s->ranking;
    closed = s->closed;
  }
  if (!ranking && s->config.mode != SessionMode::Baseline) {
    const auto& ec = s->engine->config();
    ranking = rank_gaps(memory.summary.analysis, memory.turn_index, ec.weights, ec.gap_window);
  }
  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(options_.clock() - s->started_at);
  const auto remaining = std::max<long long>(0, (s->config.time_limit - elapsed).count());
  return {{"id", s->id},
          {"mode", to_string(s->config.mode)},
          {"language", s->config.language},
          {"closed", closed},
          {"turn_index", memory.turn_index},
          {"remaining_s", static_cast<double>(remaining) / 1000.0},
          {"memory", snapshot(memory)},
          {"ranking", ranking ? to_json(*ranking) : Json()}};
}

std::vector<TurnEntry> SessionManager::end_session(const std::string& id) {
  auto s = find(id);
  std::lock_guard view(s->view_mu);
  s->closed = true;
  return s->transcript;
}

std::vector<TurnEntry> SessionManager::transcript(const std::string& id) const {
  auto s = find(id);
  std::lock_guard view(s->view_mu);
  return s->transcript;
}

std::vector<CallLedgerEntry> SessionManager::ledger(const std::string& id) const { return find(id)->gateway->ledger(); }

bool SessionManager::is_closed(const std::string& id) const {
  auto s = find(id);
  std::lock_guard view(s->view_mu);
  return s->closed;
}

}  // namespace psyprobe
