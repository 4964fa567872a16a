#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

namespace bpsim::service {

struct ServiceOptions {
  std::size_t workers = 2;
  /// Queued plus running jobs allowed per session before 409.
  std::size_t queue_limit = 4;
  std::chrono::seconds session_ttl{3600};
  /// Sessions are written here on creation and reloaded at startup.
  std::optional<std::filesystem::path> persist_dir;
};

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// Session store, job queue and worker pool behind the HTTP routes. Every
/// method is safe to call concurrently.
class ForecastService {
 public:
  explicit ForecastService(ServiceOptions options = {});
  ~ForecastService();
  ForecastService(const ForecastService&) = delete;
  ForecastService& operator=(const ForecastService&) = delete;

  /// {"model": BPMN XML, "params": object or JSON text, "log": CSV,
  ///  "m"?: int, "concurrency_threshold"?: number}
  Response create_session(const nlohmann::json& body);
  Response get_session(const std::string& session_id);
  /// 202 with a job id, or 200 with the result when `wait` is set.
  Response submit_forecast(const std::string& session_id, const nlohmann::json& scenario, bool wait);
  Response get_job(const std::string& session_id, const std::string& job_id);
  /// {"a": scenario, "b": scenario}; runs both and waits.
  Response compare(const std::string& session_id, const nlohmann::json& body);

  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t expire_sessions();
  std::size_t session_count() const;

  static nlohmann::json openapi();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8090;  // 0 picks a free port
  /// Static files served under /ui when set.
  std::optional<std::filesystem::path> ui_dir;
};

/// HTTP front end for a ForecastService.
class HttpServer {
 public:
  HttpServer(ForecastService& service, ServerOptions options = {});
  ~HttpServer();

  /// Binds the socket; returns the bound port. Throws std::runtime_error
  /// when binding fails.
  int bind();
  /// Serves until stop(); bind() first.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bpsim::service
