#include "tinker/service.hpp"

#include <chrono>

#include "httplib.h"
#include "tinker/error.hpp"
#include "tinker/scaffolding.hpp"

namespace tinker {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownProfile: return 404;
    case ErrorCode::SessionClosed:
    case ErrorCode::SummaryUnavailable:
    case ErrorCode::IncompleteSession:
    case ErrorCode::InputAfterComplete: return 409;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::EmptyResponse:
    case ErrorCode::MarkerStuck: return 502;
    case ErrorCode::StorageFailure:
    case ErrorCode::ScriptSetIncomplete: return 500;
    default: return 400;
  }
}

namespace {

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send(res, status, Json{{"error", code}, {"message", message}});
}

Json effects_json(const std::vector<IndexedEffect>& fx) {
  Json a = Json::array();
  for (const auto& e : fx) {
    auto j = to_json(e.effect);
    j["seq"] = e.seq;
    a.push_back(std::move(j));
  }
  return a;
}

Json body_of(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  auto j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::BadRecord, "request body must be a JSON object");
  return j;
}

std::string string_field(const Json& j, const char* key, bool required) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw Error(ErrorCode::BadRecord, std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) throw Error(ErrorCode::BadRecord, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

SessionEvent::Kind event_kind(const std::string& name) {
  for (auto k : {SessionEvent::Kind::Utterance, SessionEvent::Kind::Scan, SessionEvent::Kind::EndOfSpeech,
                 SessionEvent::Kind::AgentSpeechEnded})
    if (to_string(k) == name) return k;
  throw Error(ErrorCode::BadRecord, "unknown event kind '" + name + "'");
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

}  // namespace

Service::Service(Library& library, ServiceOptions options)
    : lib_(library), opts_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() { stop(); }

void Service::routes() {
  auto& srv = *server_;
  auto guarded = [this](Handler h) -> Handler {
    return [this, h](const httplib::Request& req, httplib::Response& res) {
      if (!opts_.token.empty() && req.get_header_value("Authorization") != "Bearer " + opts_.token) {
        res.set_header("WWW-Authenticate", "Bearer");
        return send_error(res, 401, "Unauthorized", "missing or wrong bearer token");
      }
      try {
        h(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), to_string(e.code()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    };
  };

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send(res, 200, Json{{"status", "ok"}, {"logFormat", kLogFormat}, {"logVersion", kLogVersion}});
  });

  srv.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_of(req);
    auto profile = string_field(body, "profileId", true);
    auto condition_name = string_field(body, "condition", true);
    auto condition = condition_from_string(condition_name);
    if (!condition) throw Error(ErrorCode::BadRecord, "unknown condition '" + condition_name + "'");
    auto created = lib_.create_session(profile, *condition, string_field(body, "sessionId", false));
    send(res, 201, Json{{"sessionId", created.session_id}, {"effects", effects_json(created.effects)}});
  }));

  srv.Post(R"(/sessions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto body = body_of(req);
    auto kind = event_kind(string_field(body, "kind", true));
    auto fx = lib_.post_event(req.matches[1], kind, string_field(body, "text", false));
    send(res, 200, Json{{"effects", effects_json(fx)}});
  }));

  srv.Get(R"(/sessions/([^/]+)/effects)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::size_t since = 0;
    if (req.has_param("since")) {
      const auto& v = req.get_param_value("since");
      try {
        std::size_t used = 0;
        auto n = std::stoll(v, &used);
        if (used != v.size() || n < 0) throw std::invalid_argument(v);
        since = static_cast<std::size_t>(n);
      } catch (const std::exception&) {
        throw Error(ErrorCode::BadRecord, "since must be a non-negative integer");
      }
    }
    auto fx = lib_.effects(req.matches[1], since);
    send(res, 200, Json{{"effects", effects_json(fx)}, {"next", fx.empty() ? since : fx.back().seq + 1}});
  }));

  srv.Get(R"(/sessions/([^/]+)/state)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send(res, 200, lib_.state(req.matches[1]));
  }));

  srv.Post(R"(/sessions/([^/]+)/complete)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send(res, 200, to_json(lib_.complete(req.matches[1])));
  }));

  srv.Post(R"(/sessions/([^/]+)/abandon)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto reason = string_field(body_of(req), "reason", false);
    lib_.abandon(req.matches[1], reason.empty() ? "abandoned by client" : reason);
    send(res, 200, Json{{"sessionId", req.matches[1]}, {"status", "abandoned"}});
  }));

  srv.Get(R"(/sessions/([^/]+)/transcript)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    Json turns = Json::array();
    for (const auto& t : lib_.transcript(req.matches[1])) turns.push_back(to_json(t));
    send(res, 200, Json{{"sessionId", req.matches[1]}, {"turns", turns}});
  }));

  srv.Get(R"(/sessions/([^/]+)/summary)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send(res, 200, to_json(lib_.summary(req.matches[1])));
  }));

  srv.Get(R"(/profiles/([^/]+)/stories)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    Json stories = Json::array();
    for (const auto& s : lib_.list_stories(req.matches[1])) stories.push_back(to_json(s));
    send(res, 200, Json{{"profileId", req.matches[1]}, {"stories", stories}});
  }));

  srv.Get(R"(/stories/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send(res, 200, to_json(lib_.get_story(req.matches[1])));
  }));

  if (!opts_.web_dir.empty() && !srv.set_mount_point("/", opts_.web_dir.string()))
    throw Error(ErrorCode::StorageFailure, "web directory not found: " + opts_.web_dir.string());
}

void Service::start_ticker() {
  if (opts_.tick_ms <= 0) return;
  ticker_ = std::thread([this] {
    while (running_) {
      std::this_thread::sleep_for(std::chrono::milliseconds(opts_.tick_ms));
      if (running_) lib_.tick();
    }
  });
}

int Service::start(const std::string& host, int port) {
  int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::StorageFailure, "cannot bind " + host + ":" + std::to_string(port));
  running_ = true;
  background_ = true;
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  start_ticker();
  return bound;
}

bool Service::run(const std::string& host, int port) {
  running_ = true;
  start_ticker();
  bool ok = server_->listen(host, port);
  running_ = false;
  if (ticker_.joinable()) ticker_.join();
  return ok;
}

void Service::stop() {
  running_ = false;
  server_->stop();
  if (!background_) return;
  if (server_thread_.joinable()) server_thread_.join();
  if (ticker_.joinable()) ticker_.join();
}

}  // namespace tinker
