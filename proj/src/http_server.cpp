#include "psyprobe/http_server.hpp"

namespace psyprobe {

namespace {

constexpr const char* kJson = "application/json; charset=utf-8";

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, Json::error_handler_t::replace), kJson);
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, http_status_for(e), error_body(e)); }

Json parse_body(const httplib::Request& req) {
  if (text::is_blank(req.body)) return Json::object();
  Json doc = Json::parse(req.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw SchemaViolation("$", "request body must be a JSON object");
  return doc;
}

std::string string_field(const Json& doc, const std::string& name) {
  auto it = doc.find(name);
  if (it == doc.end() || it->is_null()) return {};
  if (!it->is_string()) throw SchemaViolation(name, "expected a string");
  return it->get<std::string>();
}

template <class F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e);
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", "InternalError"}, {"message", e.what()}});
  }
}

}  // namespace

int http_status_for(const Error& e) {
  const std::string& c = e.code();
  if (c == "UnknownSession") return 404;
  if (c == "InvalidConfig" || c == "PreconditionViolation" || c == "SchemaViolation") return 400;
  if (c == "SessionClosed" || c == "SessionBusy") return 409;
  if (c == "TimeLimitExceeded") return 410;
  return 502;
}

Json error_body(const Error& e) {
  Json out = {{"error", e.code()}, {"message", e.what()}};
  if (const auto* s = dynamic_cast<const StageError*>(&e)) {
    out["stage"] = s->stage();
    out["cause"] = s->inner_code();
  }
  return out;
}

void install_routes(httplib::Server& server, SessionManager& manager) {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/sessions", [&manager](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Json body = parse_body(req);
      SessionConfig config = manager.options().defaults;
      if (auto it = body.find("config"); it != body.end() && !it->is_null()) {
        if (!it->is_object()) throw InvalidConfig("config must be an object");
        Json overlay = *it;
        overlay.erase("backend");
        config = session_config_from_json(overlay, config);
      }
      const std::string id =
          manager.create_session(config, string_field(body, "concern"), string_field(body, "emotion"));
      send_json(res, 201, {{"id", id}, {"state", manager.get_state(id)}});
    });
  });

  server.Post("/sessions/:id/messages", [&manager](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string& id = req.path_params.at("id");
      const Json body = parse_body(req);
      const std::string reply = manager.post_message(id, string_field(body, "text"));
      const auto transcript = manager.transcript(id);
      send_json(res, 200, {{"reply", reply}, {"turn", to_json(transcript.back())}});
    });
  });

  server.Get("/sessions/:id/state", [&manager](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, manager.get_state(req.path_params.at("id"))); });
  });

  server.Post("/sessions/:id/end", [&manager](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto entries = manager.end_session(req.path_params.at("id"));
      Json transcript = Json::array();
      for (const auto& e : entries) transcript.push_back(to_json(e));
      send_json(res, 200, {{"closed", true}, {"transcript", transcript}});
    });
  });

  server.Get("/sessions/:id/transcript", [&manager](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      res.status = 200;
      res.set_content(to_jsonl(manager.transcript(req.path_params.at("id"))), "application/x-ndjson; charset=utf-8");
    });
  });
}

}  // namespace psyprobe
