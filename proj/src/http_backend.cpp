#include "psyprobe/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "psyprobe/mock_backend.hpp"

namespace psyprobe {

namespace {

std::string env_key() {
  const char* k = std::getenv("PSYPROBE_API_KEY");
  return k ? std::string(k) : std::string{};
}

}  // namespace

HttpProviderBackend::HttpProviderBackend(const GatewayConfig& config) : HttpProviderBackend(config, env_key()) {}

HttpProviderBackend::HttpProviderBackend(const GatewayConfig& config, std::string api_key)
    : config_(config), api_key_(std::move(api_key)) {
  if (api_key_.empty()) throw InvalidConfig("PSYPROBE_API_KEY is not set");
  if (config_.base_url.rfind("http://", 0) != 0 && config_.base_url.rfind("https://", 0) != 0)
    throw InvalidConfig("base_url must start with http:// or https://");
}

Json HttpProviderBackend::request_body(const BackendRequest& req) {
  return {{"model", req.model},
          {"temperature", req.temperature},
          {"messages", Json::array({Json{{"role", "user"}, {"content", req.prompt}}})}};
}

std::string HttpProviderBackend::extract_content(const std::string& body) {
  Json doc = Json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw BackendUnavailable("provider returned a non-JSON body");
  try {
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception&) {
    throw BackendUnavailable("provider response has no choices[0].message.content");
  }
}

std::string HttpProviderBackend::generate(const BackendRequest& req) {
  httplib::Client client(config_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  client.set_bearer_token_auth(api_key_);
  auto res = client.Post(config_.endpoint, request_body(req).dump(), "application/json");
  if (!res) throw BackendUnavailable("transport error: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw BackendUnavailable("provider returned HTTP " + std::to_string(res->status));
  return extract_content(res->body);
}

std::shared_ptr<Backend> make_backend(const GatewayConfig& config, const std::string& mock_rules) {
  if (config.backend == BackendKind::Mock) return std::make_shared<MockBackend>(MockBackend::from_file(mock_rules));
  return std::make_shared<HttpProviderBackend>(config);
}

}  // namespace psyprobe
