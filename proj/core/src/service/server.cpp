#include "bpsim/service/server.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include <httplib.h>

#include "bpsim/errors.hpp"
#include "bpsim/event_log.hpp"
#include "bpsim/process_model.hpp"
#include "bpsim/service/forecast.hpp"
#include "bpsim/service/scenario.hpp"
#include "bpsim/state_discovery.hpp"

namespace bpsim::service {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

Response error(int status, const std::string& message) { return {status, {{"error", message}}}; }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Session {
  std::string id;
  std::string model_xml;
  std::string params_json;
  std::string log_csv;
  std::size_t m = 5;
  double concurrency_threshold = kDefaultConcurrencyThreshold;

  std::optional<BPSModel> model;
  ProcessState state;
  std::vector<Diagnostic> diagnostics;
  std::string hash;

  std::atomic<Clock::rep> last_access{0};
  std::atomic<std::size_t> active_jobs{0};

  void touch() { last_access = Clock::now().time_since_epoch().count(); }
};

enum class JobStatus { Queued, Running, Done, Failed };

const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
  }
  return "?";
}

struct Job {
  std::string id;
  std::shared_ptr<Session> session;
  std::function<json()> work;
  JobStatus status = JobStatus::Queued;
  json result;
  std::string error;
};

json session_json(const Session& s) {
  std::size_t activities = 0;
  std::size_t tokens = 0;
  for (const auto& c : s.state.cases) {
    activities += c.ongoing.size();
    tokens += c.flows.size();
  }
  json diags = json::array();
  for (const auto& d : s.diagnostics) {
    diags.push_back({{"case_id", d.case_id}, {"kind", std::string(to_string(d.kind))}, {"detail", d.detail}});
  }
  return {{"session_id", s.id},
          {"state_hash", s.hash},
          {"summary",
           {{"at", format_timestamp(s.state.at)},
            {"cases", s.state.cases.size()},
            {"ongoing_activities", activities},
            {"tokens", tokens}}},
          {"state", json::parse(write_state(s.state, -1))},
          {"diagnostics", std::move(diags)}};
}

// Parses the uploads and discovers the state; throws ValidationError.
void build_session(Session& s) {
  const WFGraph graph = parse_bpmn(s.model_xml);
  s.model = parse_params(s.params_json, graph);
  const EventLog log = parse_log(s.log_csv);
  DiscoveryConfig cfg;
  cfg.m = s.m;
  cfg.concurrency_threshold = s.concurrency_threshold;
  DiscoveryResult result = discover_state(log, graph, cfg);
  s.state = std::move(result.state);
  s.diagnostics = std::move(result.diagnostics);
  s.hash = state_hash(s.state);
}

}  // namespace

struct ForecastService::Impl {
  ServiceOptions options;

  mutable std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::size_t next_session = 1;

  std::mutex jobs_mutex;
  std::condition_variable work_cv;
  std::condition_variable done_cv;
  std::deque<std::shared_ptr<Job>> queue;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::size_t next_job = 1;
  bool stopping = false;
  std::vector<std::thread> workers;

  std::shared_ptr<Session> find(const std::string& id) {
    std::shared_lock lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) return nullptr;
    it->second->touch();
    return it->second;
  }

  void worker() {
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(jobs_mutex);
        work_cv.wait(lock, [&] { return stopping || !queue.empty(); });
        if (stopping) return;
        job = queue.front();
        queue.pop_front();
        job->status = JobStatus::Running;
      }
      json result;
      std::string failure;
      try {
        result = job->work();
      } catch (const std::exception& e) {
        failure = e.what();
      }
      {
        std::lock_guard lock(jobs_mutex);
        if (failure.empty()) {
          job->status = JobStatus::Done;
          job->result = std::move(result);
        } else {
          job->status = JobStatus::Failed;
          job->error = std::move(failure);
        }
        --job->session->active_jobs;
      }
      done_cv.notify_all();
    }
  }

  // Returns nullptr when the session's queue is full.
  std::shared_ptr<Job> enqueue(const std::shared_ptr<Session>& session, std::function<json()> work) {
    std::lock_guard lock(jobs_mutex);
    if (session->active_jobs >= options.queue_limit) return nullptr;
    auto job = std::make_shared<Job>();
    char buf[32];
    std::snprintf(buf, sizeof buf, "j%06zu", next_job++);
    job->id = buf;
    job->session = session;
    job->work = std::move(work);
    ++session->active_jobs;
    jobs.emplace(job->id, job);
    queue.push_back(job);
    work_cv.notify_one();
    return job;
  }

  void wait(const std::shared_ptr<Job>& job) {
    std::unique_lock lock(jobs_mutex);
    done_cv.wait(lock, [&] { return job->status == JobStatus::Done || job->status == JobStatus::Failed; });
  }

  json job_json(const Job& job) {
    json j{{"job_id", job.id}, {"session_id", job.session->id}, {"status", to_string(job.status)}};
    if (job.status == JobStatus::Done) j["result"] = job.result;
    if (job.status == JobStatus::Failed) j["error"] = job.error;
    return j;
  }

  void persist(const Session& s) {
    if (!options.persist_dir) return;
    const auto dir = *options.persist_dir / s.id;
    std::filesystem::create_directories(dir);
    write_file(dir / "model.bpmn", s.model_xml);
    write_file(dir / "params.json", s.params_json);
    write_file(dir / "log.csv", s.log_csv);
    write_file(dir / "session.json",
               json{{"m", s.m}, {"concurrency_threshold", s.concurrency_threshold}}.dump());
  }

  void restore() {
    if (!options.persist_dir || !std::filesystem::is_directory(*options.persist_dir)) return;
    for (const auto& entry : std::filesystem::directory_iterator(*options.persist_dir)) {
      if (!entry.is_directory()) continue;
      auto s = std::make_shared<Session>();
      s->id = entry.path().filename().string();
      try {
        s->model_xml = read_file(entry.path() / "model.bpmn");
        s->params_json = read_file(entry.path() / "params.json");
        s->log_csv = read_file(entry.path() / "log.csv");
        const json meta = json::parse(read_file(entry.path() / "session.json"));
        s->m = meta.value("m", s->m);
        s->concurrency_threshold = meta.value("concurrency_threshold", s->concurrency_threshold);
        build_session(*s);
      } catch (const std::exception&) {
        continue;  // unreadable leftovers are skipped
      }
      s->touch();
      std::size_t n = 0;
      if (std::sscanf(s->id.c_str(), "s%zu", &n) == 1) next_session = std::max(next_session, n + 1);
      sessions.emplace(s->id, s);
    }
  }
};

ForecastService::ForecastService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  if (impl_->options.workers == 0) impl_->options.workers = 1;
  impl_->restore();
  for (std::size_t i = 0; i < impl_->options.workers; ++i) {
    impl_->workers.emplace_back([this] { impl_->worker(); });
  }
}

ForecastService::~ForecastService() {
  {
    std::lock_guard lock(impl_->jobs_mutex);
    impl_->stopping = true;
  }
  impl_->work_cv.notify_all();
  for (auto& t : impl_->workers) t.join();
}

Response ForecastService::create_session(const json& body) {
  expire_sessions();
  auto s = std::make_shared<Session>();
  try {
    if (!body.is_object()) throw ValidationError("request body must be a JSON object");
    for (const char* key : {"model", "params", "log"}) {
      if (!body.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
    }
    s->model_xml = body.at("model").get<std::string>();
    const json& params = body.at("params");
    s->params_json = params.is_string() ? params.get<std::string>() : params.dump();
    s->log_csv = body.at("log").get<std::string>();
    if (body.contains("m")) s->m = body.at("m").get<std::size_t>();
    if (body.contains("concurrency_threshold")) {
      s->concurrency_threshold = body.at("concurrency_threshold").get<double>();
    }
    build_session(*s);
  } catch (const json::exception& e) {
    return error(422, std::string("malformed session request: ") + e.what());
  } catch (const ValidationError& e) {
    return error(422, e.what());
  } catch (const BudgetExceeded& e) {
    return error(422, e.what());
  }
  s->touch();
  {
    std::unique_lock lock(impl_->sessions_mutex);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06zu", impl_->next_session++);
    s->id = buf;
    impl_->sessions.emplace(s->id, s);
  }
  impl_->persist(*s);
  return {201, session_json(*s)};
}

Response ForecastService::get_session(const std::string& session_id) {
  expire_sessions();
  auto s = impl_->find(session_id);
  if (!s) return error(404, "unknown session '" + session_id + "'");
  return {200, session_json(*s)};
}

Response ForecastService::submit_forecast(const std::string& session_id, const json& body, bool wait) {
  expire_sessions();
  auto s = impl_->find(session_id);
  if (!s) return error(404, "unknown session '" + session_id + "'");
  Scenario scenario;
  try {
    scenario = parse_scenario(body.is_null() ? json::object() : body);
    apply_scenario(*s->model, scenario);
  } catch (const ValidationError& e) {
    return error(422, e.what());
  }
  auto job = impl_->enqueue(s, [s, scenario] {
    return forecast_json(run_forecast(*s->model, s->state, scenario));
  });
  if (!job) return error(409, "session '" + session_id + "' has too many pending forecasts");
  if (!wait) return {202, impl_->job_json(*job)};
  impl_->wait(job);
  std::lock_guard lock(impl_->jobs_mutex);
  if (job->status == JobStatus::Failed) return error(422, job->error);
  return {200, impl_->job_json(*job)};
}

Response ForecastService::get_job(const std::string& session_id, const std::string& job_id) {
  expire_sessions();
  if (!impl_->find(session_id)) return error(404, "unknown session '" + session_id + "'");
  std::lock_guard lock(impl_->jobs_mutex);
  auto it = impl_->jobs.find(job_id);
  if (it == impl_->jobs.end() || it->second->session->id != session_id) {
    return error(404, "unknown job '" + job_id + "'");
  }
  return {200, impl_->job_json(*it->second)};
}

Response ForecastService::compare(const std::string& session_id, const json& body) {
  expire_sessions();
  auto s = impl_->find(session_id);
  if (!s) return error(404, "unknown session '" + session_id + "'");
  if (!body.is_object() || !body.contains("a") || !body.contains("b")) {
    return error(422, "compare needs scenarios 'a' and 'b'");
  }
  Scenario a;
  Scenario b;
  for (auto [key, target] : {std::pair{"a", &a}, std::pair{"b", &b}}) {
    try {
      *target = parse_scenario(body.at(key));
      apply_scenario(*s->model, *target);
    } catch (const ValidationError& e) {
      return error(422, std::string("scenario '") + key + "': " + e.what());
    }
  }
  auto job = impl_->enqueue(s, [s, a, b] {
    const Forecast fa = run_forecast(*s->model, s->state, a);
    const Forecast fb = run_forecast(*s->model, s->state, b);
    return compare_json(fa, fb);
  });
  if (!job) return error(409, "session '" + session_id + "' has too many pending forecasts");
  impl_->wait(job);
  std::lock_guard lock(impl_->jobs_mutex);
  if (job->status == JobStatus::Failed) return error(422, job->error);
  return {200, job->result};
}

std::size_t ForecastService::expire_sessions() {
  const auto now = Clock::now().time_since_epoch().count();
  const auto ttl = std::chrono::duration_cast<Clock::duration>(impl_->options.session_ttl).count();
  std::unique_lock lock(impl_->sessions_mutex);
  return std::erase_if(impl_->sessions, [&](const auto& entry) {
    return now - entry.second->last_access.load() > ttl;
  });
}

std::size_t ForecastService::session_count() const {
  std::shared_lock lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

json ForecastService::openapi() {
  auto op = [](const char* summary, json responses) {
    return json{{"summary", summary}, {"responses", std::move(responses)}};
  };
  auto id_param = [](const char* name) {
    return json{{"name", name}, {"in", "path"}, {"required", true}, {"schema", {{"type", "string"}}}};
  };
  json paths;
  paths["/sessions"]["post"] =
      op("Upload model, parameters and log; discover the current state",
         {{"201", {{"description", "session with state summary"}}},
          {"422", {{"description", "validation error"}}}});
  paths["/sessions/{id}"]["get"] = op("Session state and diagnostics",
                                      {{"200", {{"description", "session"}}},
                                       {"404", {{"description", "unknown session"}}}});
  paths["/sessions/{id}"]["parameters"] = json::array({id_param("id")});
  paths["/sessions/{id}/forecast"]["post"] =
      op("Queue a short-term forecast for a scenario (?wait=true blocks)",
         {{"200", {{"description", "finished job"}}},
          {"202", {{"description", "queued job"}}},
          {"409", {{"description", "session queue full"}}},
          {"422", {{"description", "invalid scenario"}}}});
  paths["/sessions/{id}/forecast"]["parameters"] = json::array({id_param("id")});
  paths["/sessions/{id}/forecast/{job}"]["get"] =
      op("Job status and result", {{"200", {{"description", "job"}}},
                                   {"404", {{"description", "unknown session or job"}}}});
  paths["/sessions/{id}/forecast/{job}"]["parameters"] =
      json::array({id_param("id"), id_param("job")});
  paths["/sessions/{id}/compare"]["post"] =
      op("Forecast scenarios a and b and report b - a",
         {{"200", {{"description", "paired forecasts and deltas"}}},
          {"409", {{"description", "session queue full"}}},
          {"422", {{"description", "invalid scenario"}}}});
  paths["/sessions/{id}/compare"]["parameters"] = json::array({id_param("id")});
  paths["/spec"]["get"] = op("This document", {{"200", {{"description", "OpenAPI document"}}}});
  return {{"openapi", "3.0.3"},
          {"info", {{"title", "bpsim forecast service"}, {"version", "0.1.0"}}},
          {"paths", std::move(paths)}};
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  ForecastService& service;
  ServerOptions options;
  httplib::Server server;

  Impl(ForecastService& s, ServerOptions o) : service(s), options(std::move(o)) {}

  static void reply(httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  }

  static std::optional<json> body_of(const httplib::Request& req, httplib::Response& res) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      reply(res, error(400, std::string("malformed JSON body: ") + e.what()));
      return std::nullopt;
    }
  }

  void routes() {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto body = body_of(req, res)) reply(res, service.create_session(*body));
    });
    server.Get("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.get_session(req.path_params.at("id")));
    });
    server.Post("/sessions/:id/forecast", [this](const httplib::Request& req, httplib::Response& res) {
      const auto w = req.get_param_value("wait");
      if (auto body = body_of(req, res)) {
        reply(res, service.submit_forecast(req.path_params.at("id"), *body, w == "true" || w == "1"));
      }
    });
    server.Get("/sessions/:id/forecast/:job", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.get_job(req.path_params.at("id"), req.path_params.at("job")));
    });
    server.Post("/sessions/:id/compare", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto body = body_of(req, res)) reply(res, service.compare(req.path_params.at("id"), *body));
    });
    server.Get("/spec", [](const httplib::Request&, httplib::Response& res) {
      reply(res, {200, ForecastService::openapi()});
    });
    if (options.ui_dir) server.set_mount_point("/ui", options.ui_dir->string());
  }
};

HttpServer::HttpServer(ForecastService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const auto& o = impl_->options;
  if (o.port == 0) {
    const int port = impl_->server.bind_to_any_port(o.host);
    if (port < 0) throw std::runtime_error("cannot bind " + o.host);
    return port;
  }
  if (!impl_->server.bind_to_port(o.host, o.port)) {
    throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  return o.port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace bpsim::service
