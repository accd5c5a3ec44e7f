#pragma once

#include <httplib.h>

#include "psyprobe/session.hpp"

namespace psyprobe {

/// HTTP status for a typed failure.
int http_status_for(const Error& e);
Json error_body(const Error& e);

/// Registers the session routes and CORS handling on `server`. Clients may
/// pick mode, language and time limit; the backend always comes from the
/// manager's defaults.
void install_routes(httplib::Server& server, SessionManager& manager);

}  // namespace psyprobe
