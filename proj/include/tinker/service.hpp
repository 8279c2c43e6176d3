#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "tinker/persistence.hpp"

namespace httplib {
class Server;
}

namespace tinker {

struct ServiceOptions {
  std::string token;             ///< bearer token; empty disables auth
  std::int64_t tick_ms = 250;    ///< background finalize/timeout interval; 0 disables the ticker
  std::filesystem::path web_dir;  ///< optional static files served at /
};

/// HTTP/JSON front end over a Library.
///
///   GET  /health
///   POST /sessions                        {profileId, condition, sessionId?}
///   POST /sessions/{id}/events            {kind, text?}
///   GET  /sessions/{id}/effects?since=N
///   GET  /sessions/{id}/state
///   POST /sessions/{id}/complete
///   POST /sessions/{id}/abandon           {reason?}
///   GET  /sessions/{id}/transcript
///   GET  /sessions/{id}/summary
///   GET  /profiles/{pid}/stories
///   GET  /stories/{id}
///
/// Errors are {"error": code, "message": text} with a matching status.
class Service {
 public:
  Service(Library& library, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port. Throws StorageFailure when binding fails.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  bool run(const std::string& host, int port);
  void stop();

 private:
  void routes();
  void start_ticker();

  Library& lib_;
  ServiceOptions opts_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  std::thread ticker_;
  std::atomic<bool> running_{false};
  bool background_ = false;
};

/// HTTP status for an engine error code.
int http_status(ErrorCode code);

}  // namespace tinker
