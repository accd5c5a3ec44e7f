#include "psyprobe/gateway.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <thread>

namespace psyprobe {

namespace {

constexpr std::array<PromptKind, kPromptKindCount> kKinds = {
    PromptKind::CognitiveError, PromptKind::PppppiAlign,   PromptKind::Tom,         PromptKind::TurnHistory,
    PromptKind::PppppiUpdate,   PromptKind::SummaryUpdate, PromptKind::LabelRound1, PromptKind::LabelRound2,
    PromptKind::StrategyGen,    PromptKind::QuestionIdeation, PromptKind::Draft,    PromptKind::Critic,
    PromptKind::BaselineCounselor};

constexpr std::array<const char*, kPromptKindCount> kKindNames = {
    "cognitive_error", "pppppi_align", "tom",   "turn_history",      "pppppi_update",
    "summary_update",  "label_round1", "label_round2", "strategy_gen", "question_ideation",
    "draft",           "critic",       "baseline_counselor"};

constexpr std::string_view kReasoningPreamble =
    "Before answering, reason step by step inside <reasoning>...</reasoning>. "
    "Only the content after the closing tag is read.\n\n";

void strip_blocks(std::string& s, std::string_view open, std::string_view close) {
  for (;;) {
    const auto b = s.find(open);
    if (b == std::string::npos) return;
    const auto e = s.find(close, b + open.size());
    if (e == std::string::npos) {
      s.erase(b);
      return;
    }
    s.erase(b, e + close.size() - b);
  }
}

}  // namespace

std::span<const PromptKind, kPromptKindCount> all_prompt_kinds() { return kKinds; }

std::string to_string(PromptKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<PromptKind> parse_prompt_kind(std::string_view s) {
  for (std::size_t i = 0; i < kPromptKindCount; ++i) {
    if (s == kKindNames[i]) return kKinds[i];
  }
  return std::nullopt;
}

bool is_text_kind(PromptKind k) { return k == PromptKind::Draft || k == PromptKind::BaselineCounselor; }

KindSettings GatewayConfig::settings_for(PromptKind k) const {
  auto it = per_kind.find(k);
  return it == per_kind.end() ? KindSettings{} : it->second;
}

void GatewayConfig::validate() const {
  if (max_retries < 0) throw InvalidConfig("max_retries must be >= 0");
  if (rate_limit_per_minute < 0) throw InvalidConfig("rate_limit_per_minute must be >= 0");
  if (timeout.count() <= 0) throw InvalidConfig("timeout must be positive");
}

GatewayConfig gateway_config_from_json(const Json& doc) {
  GatewayConfig c;
  if (!doc.is_object()) throw InvalidConfig("backend config must be an object");
  if (doc.contains("backend")) {
    const auto b = doc.at("backend").get<std::string>();
    if (b == "mock") {
      c.backend = BackendKind::Mock;
    } else if (b == "http_provider") {
      c.backend = BackendKind::HttpProvider;
    } else {
      throw InvalidConfig("unknown backend '" + b + "'");
    }
  }
  c.model_name = doc.value("model_name", c.model_name);
  c.max_retries = doc.value("max_retries", c.max_retries);
  c.timeout = std::chrono::milliseconds(doc.value("timeout_ms", static_cast<long long>(c.timeout.count())));
  c.rate_limit_per_minute = doc.value("rate_limit_per_minute", c.rate_limit_per_minute);
  c.base_url = doc.value("base_url", c.base_url);
  c.endpoint = doc.value("endpoint", c.endpoint);
  if (doc.contains("per_kind")) {
    for (const auto& [name, settings] : doc.at("per_kind").items()) {
      auto kind = parse_prompt_kind(name);
      if (!kind) throw InvalidConfig("unknown prompt kind '" + name + "'");
      KindSettings ks;
      ks.temperature = settings.value("temperature", ks.temperature);
      ks.reasoning_preamble = settings.value("reasoning_preamble", ks.reasoning_preamble);
      c.per_kind[*kind] = ks;
    }
  }
  c.validate();
  return c;
}

Json to_json(const GatewayConfig& c) {
  Json per_kind = Json::object();
  for (const auto& [k, s] : c.per_kind)
    per_kind[to_string(k)] = {{"temperature", s.temperature}, {"reasoning_preamble", s.reasoning_preamble}};
  return {{"backend", c.backend == BackendKind::Mock ? "mock" : "http_provider"},
          {"model_name", c.model_name},
          {"max_retries", c.max_retries},
          {"timeout_ms", c.timeout.count()},
          {"rate_limit_per_minute", c.rate_limit_per_minute},
          {"base_url", c.base_url},
          {"endpoint", c.endpoint},
          {"per_kind", per_kind}};
}

Json to_json(const CallLedgerEntry& e) {
  return {{"kind", to_string(e.kind)},
          {"turn_index", e.turn_index},
          {"rendered_prompt", e.rendered_prompt},
          {"raw_response", e.raw_response},
          {"attempts", e.attempts},
          {"outcome", e.outcome}};
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t;
  for (PromptKind k : kKinds) {
    const auto file = dir / (to_string(k) + ".txt");
    std::ifstream in(file, std::ios::binary);
    if (!in) throw TemplateError("missing prompt template " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    t.set(k, ss.str());
  }
  return t;
}

void PromptTemplates::set(PromptKind kind, std::string body) { bodies_[kind] = std::move(body); }

const std::string& PromptTemplates::body(PromptKind kind) const {
  auto it = bodies_.find(kind);
  if (it == bodies_.end()) throw TemplateError("no template for " + to_string(kind));
  return it->second;
}

std::vector<std::string> PromptTemplates::variables(PromptKind kind) const {
  const std::string& b = body(kind);
  std::vector<std::string> out;
  for (std::size_t pos = b.find("{{"); pos != std::string::npos; pos = b.find("{{", pos + 2)) {
    const auto end = b.find("}}", pos + 2);
    if (end == std::string::npos) break;
    std::string name = text::trim(std::string_view(b).substr(pos + 2, end - pos - 2));
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
  }
  return out;
}

std::string PromptTemplates::render(PromptKind kind, const Json& vars) const {
  const std::string& b = body(kind);
  std::string out;
  out.reserve(b.size() * 2);
  std::size_t pos = 0;
  for (;;) {
    const auto open = b.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = b.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(b, pos, open - pos);
    const std::string name = text::trim(std::string_view(b).substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) throw TemplateError(to_string(kind) + " template variable '" + name + "' is unbound");
    if (it->is_string()) {
      out += it->get<std::string>();
    } else {
      out += it->dump(-1, ' ', false, Json::error_handler_t::replace);
    }
    pos = close + 2;
  }
  out.append(b, pos, std::string::npos);
  return out;
}

std::string clean_response(std::string_view raw, bool expect_json) {
  std::string s(raw);
  strip_blocks(s, "<reasoning>", "</reasoning>");
  strip_blocks(s, "<think>", "</think>");
  s = text::trim(s);
  if (s.rfind("```", 0) == 0) {
    const auto nl = s.find('\n');
    s = nl == std::string::npos ? std::string{} : s.substr(nl + 1);
    const auto fence = s.rfind("```");
    if (fence != std::string::npos) s.erase(fence);
    s = text::trim(s);
  }
  if (expect_json) {
    const auto b = s.find('{');
    const auto e = s.rfind('}');
    if (b != std::string::npos && e != std::string::npos && e > b) s = s.substr(b, e - b + 1);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Rate limiter
// ---------------------------------------------------------------------------

RateLimiter::RateLimiter(int per_minute, Clock clock, Sleeper sleeper)
    : per_minute_(per_minute), clock_(std::move(clock)), sleeper_(std::move(sleeper)) {
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
  if (!sleeper_) sleeper_ = [](std::chrono::steady_clock::duration d) { std::this_thread::sleep_for(d); };
}

std::chrono::steady_clock::duration RateLimiter::acquire() {
  using namespace std::chrono;
  if (per_minute_ <= 0) return steady_clock::duration::zero();
  std::lock_guard lock(mu_);
  const auto start = clock_();
  auto now = start;
  std::erase_if(window_, [&](auto t) { return now - t >= minutes(1); });
  if (static_cast<int>(window_.size()) >= per_minute_) {
    const auto oldest = *std::min_element(window_.begin(), window_.end());
    const auto wait = oldest + minutes(1) - now;
    if (wait > steady_clock::duration::zero()) sleeper_(wait);
    now = clock_();
    if (now < oldest + minutes(1)) now = oldest + minutes(1);
    std::erase_if(window_, [&](auto t) { return now - t >= minutes(1); });
  }
  window_.push_back(now);
  return now - start;
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

Gateway::Gateway(GatewayConfig config, std::shared_ptr<Backend> backend,
                 std::shared_ptr<const PromptTemplates> templates, std::shared_ptr<RateLimiter> limiter)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      templates_(std::move(templates)),
      limiter_(std::move(limiter)) {
  config_.validate();
  if (!backend_) throw InvalidConfig("gateway requires a backend");
  if (!templates_) throw InvalidConfig("gateway requires prompt templates");
}

void Gateway::run(const Call& call, const std::function<void(const std::string&)>& accept,
                  const std::function<bool(const SchemaViolation&)>& exhausted) {
  const KindSettings settings = config_.settings_for(call.kind);
  const std::string base_prompt =
      (settings.reasoning_preamble ? std::string(kReasoningPreamble) : std::string{}) +
      templates_->render(call.kind, call.vars);

  CallLedgerEntry entry;
  entry.kind = call.kind;
  entry.turn_index = call.turn_index;
  entry.rendered_prompt = base_prompt;

  auto record = [&](std::string outcome) {
    entry.outcome = std::move(outcome);
    std::lock_guard lock(ledger_mu_);
    ledger_.push_back(entry);
  };

  std::string prompt = base_prompt;
  std::optional<SchemaViolation> last;
  const int max_attempts = config_.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    entry.attempts = attempt;
    try {
      if (limiter_) limiter_->acquire();
      entry.raw_response = backend_->generate(
          BackendRequest{call.kind, prompt, call.vars, config_.model_name, settings.temperature, attempt});
    } catch (const Error& e) {
      record(e.code());
      throw;
    } catch (const std::exception& e) {
      record("BackendUnavailable");
      throw BackendUnavailable(e.what());
    }
    try {
      accept(entry.raw_response);
      record("ok");
      return;
    } catch (const SchemaViolation& v) {
      last = v;
      prompt = base_prompt + "\n\nYour previous output was rejected at `" + v.path() + "`: " + v.reason() +
               ". Return a corrected output that follows the schema exactly.";
    }
  }
  if (exhausted(*last)) {
    record("repaired");
    return;
  }
  record("MalformedAfterRetries");
  throw MalformedAfterRetries(to_string(call.kind), max_attempts, *last);
}

std::vector<CallLedgerEntry> Gateway::ledger() const {
  std::lock_guard lock(ledger_mu_);
  return ledger_;
}

std::size_t Gateway::ledger_size() const {
  std::lock_guard lock(ledger_mu_);
  return ledger_.size();
}

}  // namespace psyprobe
