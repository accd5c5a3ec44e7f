#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "psyprobe/http_backend.hpp"

using namespace psyprobe;

TEST(HttpBackend, RequestBodyShape) {
  const std::string prompt = "hello";
  const std::string model = "gpt-x";
  const Json vars = Json::object();
  const Json body = HttpProviderBackend::request_body({PromptKind::Draft, prompt, vars, model, 0.3, 1});
  EXPECT_EQ(body["model"], "gpt-x");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.3);
  ASSERT_EQ(body["messages"].size(), 1u);
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hello");
}

TEST(HttpBackend, ExtractContent) {
  EXPECT_EQ(HttpProviderBackend::extract_content(R"({"choices":[{"message":{"content":"hi"}}]})"), "hi");
  EXPECT_THROW(HttpProviderBackend::extract_content(R"({"choices":[]})"), BackendUnavailable);
  EXPECT_THROW(HttpProviderBackend::extract_content("<html>"), BackendUnavailable);
}

TEST(HttpBackend, KeyComesFromEnvironment) {
  GatewayConfig c;
  c.backend = BackendKind::HttpProvider;
  ::unsetenv("PSYPROBE_API_KEY");
  EXPECT_THROW(HttpProviderBackend{c}, InvalidConfig);
  ::setenv("PSYPROBE_API_KEY", "k", 1);
  EXPECT_NO_THROW(HttpProviderBackend{c});
  ::unsetenv("PSYPROBE_API_KEY");
  c.base_url = "ftp://example";
  EXPECT_THROW(HttpProviderBackend(c, "k"), InvalidConfig);
}

TEST(HttpBackend, TalksToCompatibleServer) {
  httplib::Server server;
  std::string auth;
  Json received;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    received = Json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"content":"reply text"}}]})", "application/json");
  });
  server.Post("/fail/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  GatewayConfig c;
  c.backend = BackendKind::HttpProvider;
  c.base_url = "http://127.0.0.1:" + std::to_string(port);
  c.model_name = "m";
  HttpProviderBackend backend(c, "secret");
  const std::string prompt = "p";
  const Json vars = Json::object();
  EXPECT_EQ(backend.generate({PromptKind::Tom, prompt, vars, c.model_name, 0.0, 1}), "reply text");
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_EQ(received["messages"][0]["content"], "p");

  c.endpoint = "/fail/v1/chat/completions";
  HttpProviderBackend failing(c, "secret");
  EXPECT_THROW(failing.generate({PromptKind::Tom, prompt, vars, c.model_name, 0.0, 1}), BackendUnavailable);

  server.stop();
  th.join();
  c.base_url = "http://127.0.0.1:1";
  c.timeout = std::chrono::milliseconds(500);
  HttpProviderBackend unreachable(c, "secret");
  EXPECT_THROW(unreachable.generate({PromptKind::Tom, prompt, vars, c.model_name, 0.0, 1}), BackendUnavailable);
}
