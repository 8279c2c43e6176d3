#include "httplib.h"
#include "tinker/narrator.hpp"

namespace tinker {

namespace {

struct Url {
  std::string origin;  // scheme://host:port
  std::string path;
};

Url split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ProviderError(ProviderCause::Network, "bad url " + url);
  auto path_at = url.find('/', scheme_end + 3);
  if (path_at == std::string::npos) return {url, "/"};
  return {url.substr(0, path_at), url.substr(path_at)};
}

}  // namespace

std::string RemoteNarrator::complete(const NarratorContext& ctx) {
  auto url = split_url(cfg_.url);
  auto body = build_request(ctx, cfg_).dump();
  if (cfg_.trace)
    cfg_.trace("request " + url.path + " model=" + cfg_.model + " bytes=" + std::to_string(body.size()) +
               " auth=" + (cfg_.api_key.empty() ? "none" : "[redacted]"));

  httplib::Client client(url.origin);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    headers.emplace("x-api-key", cfg_.api_key);
  }
  headers.emplace("anthropic-version", "2023-06-01");

  auto res = client.Post(url.path, headers, body, "application/json");
  if (!res) {
    auto err = res.error();
    if (cfg_.trace) cfg_.trace("response error=" + httplib::to_string(err));
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw ProviderError(ProviderCause::Timeout, "no reply within " + std::to_string(cfg_.timeout.count()) + " ms");
    throw ProviderError(ProviderCause::Network, httplib::to_string(err));
  }
  if (cfg_.trace)
    cfg_.trace("response status=" + std::to_string(res->status) + " bytes=" + std::to_string(res->body.size()));
  if (res->status == 401 || res->status == 403) throw ProviderError(ProviderCause::AuthFailure, "status " + std::to_string(res->status));
  if (res->status == 429) throw ProviderError(ProviderCause::RateLimited, "status 429");
  if (res->status != 200) throw ProviderError(ProviderCause::BadResponse, "status " + std::to_string(res->status));
  try {
    return response_text(Json::parse(res->body));
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderCause::BadResponse, e.what());
  }
}

}  // namespace tinker
