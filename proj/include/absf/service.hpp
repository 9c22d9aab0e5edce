#pragma once

#include "absf/io.hpp"
#include "absf/scenario.hpp"

#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace absf {

inline constexpr int kDefaultPort = 8137;

// Request handlers. Each takes the parsed body and returns the response body;
// FormatError marks a malformed request.
Json handle_model(const Pipeline& ctx);
Json handle_evaluate(const Pipeline& ctx, const Json& body);
Json handle_solve(const Pipeline& ctx, const Json& body);
Json handle_simulate(const Pipeline& ctx, const Json& body);
Json handle_metrology(const Pipeline& ctx, const Json& body);

// Registers GET /model and POST /evaluate, /solve, /simulate, /metrology.
void setup_routes(httplib::Server& server, std::shared_ptr<const Pipeline> ctx);

// Blocks serving on 127.0.0.1:port. Returns false if the port cannot be bound.
bool serve(std::shared_ptr<const Pipeline> ctx, int port);

}  // namespace absf
