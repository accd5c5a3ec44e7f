#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "psyprobe/http_backend.hpp"
#include "psyprobe/http_server.hpp"

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PsyProbe counseling session service"};
  std::string config_path;
  std::string assets = PSYPROBE_ASSET_DIR;
  std::string data_dir;
  std::string host;
  int port = 0;
  bool mock = false;
  app.add_option("--config", config_path, "JSON config file with session/engine/server sections");
  app.add_option("--assets", assets, "Directory holding prompts, few-shot store and mock rules");
  app.add_option("--data-dir", data_dir, "Where session transcripts are appended");
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Listen port");
  app.add_flag("--mock", mock, "Use the deterministic mock backend");
  CLI11_PARSE(app, argc, argv);

  try {
    psyprobe::ServiceOptions options = psyprobe::default_service_options(assets);
    psyprobe::Json server_cfg = psyprobe::Json::object();
    if (!config_path.empty()) {
      const psyprobe::Json doc = psyprobe::read_json_file(config_path);
      psyprobe::apply_config(options, doc);
      server_cfg = doc.value("server", psyprobe::Json::object());
    }
    if (mock) options.defaults.backend = psyprobe::GatewayConfig{};
    if (host.empty()) host = server_cfg.value("host", std::string("127.0.0.1"));
    if (port == 0) port = server_cfg.value("port", 8080);
    if (data_dir.empty()) data_dir = server_cfg.value("data_dir", std::string("data/sessions"));
    options.data_dir = data_dir;

    psyprobe::make_backend(options.defaults.backend, (options.assets_dir / "mock_rules.json").string());

    psyprobe::SessionManager manager(options);
    httplib::Server server;
    psyprobe::install_routes(server, manager);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    std::cout << "listening on " << host << ":" << port << " (backend "
              << (options.defaults.backend.backend == psyprobe::BackendKind::Mock ? "mock" : "http_provider")
              << ", mode " << psyprobe::to_string(options.defaults.mode) << ")" << std::endl;
    if (!server.listen(host, port)) {
      std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
      return 1;
    }
  } catch (const psyprobe::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
