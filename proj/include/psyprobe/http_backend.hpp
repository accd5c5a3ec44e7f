#pragma once

#include <memory>
#include <string>

#include "psyprobe/gateway.hpp"

namespace psyprobe {

/// Chat-completions adapter for OpenAI-compatible providers. The key is read
/// from PSYPROBE_API_KEY at construction.
class HttpProviderBackend final : public Backend {
 public:
  /// Throws InvalidConfig when the key is missing or the URL is unusable.
  explicit HttpProviderBackend(const GatewayConfig& config);
  HttpProviderBackend(const GatewayConfig& config, std::string api_key);

  std::string generate(const BackendRequest& req) override;

  /// Request body sent for `req`; exposed for tests.
  static Json request_body(const BackendRequest& req);
  /// Extracts the assistant message; throws BackendUnavailable on a body
  /// that does not have the expected shape.
  static std::string extract_content(const std::string& body);

 private:
  GatewayConfig config_;
  std::string api_key_;
};

/// Builds the backend selected by `config`. Mock backends load the rule table
/// from `mock_rules`.
std::shared_ptr<Backend> make_backend(const GatewayConfig& config, const std::string& mock_rules);

}  // namespace psyprobe
