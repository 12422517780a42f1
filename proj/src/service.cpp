#include "socdbg/service.hpp"

#include <httplib.h>

#include "socdbg/execution.hpp"
#include "socdbg/jsonl.hpp"

namespace socdbg {

namespace {

struct HttpError {
  int status;
  std::string code;
  std::string message;
  Json detail;
};

const std::string& require_string(const Json& body, const char* key) {
  if (!body.contains(key)) throw DataError(key, "required");
  const Json& v = body.at(key);
  if (!v.is_string()) throw DataError(key, "expected a string");
  const auto& s = v.get_ref<const std::string&>();
  if (s.find_first_not_of(" \t\r\n") == std::string::npos) throw DataError(key, "must not be empty");
  return s;
}

std::string optional_string(const Json& body, const char* key, const std::string& fallback) {
  if (!body.contains(key)) return fallback;
  return require_string(body, key);
}

Json parse_body(const httplib::Request& req) {
  Json body = Json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) throw HttpError{400, "invalid_request", "body must be a JSON object", {}};
  return body;
}

HttpError classify(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const HttpError& e) {
    return e;
  } catch (const DataError& e) {
    return {400, "invalid_request", e.what(), Json{{"field", e.field()}}};
  } catch (const ValidationError& e) {
    return {400, "invalid_request", e.what(), {}};
  } catch (const RtParseError& e) {
    return {422, "unparseable_output", e.what(), e.label() ? Json{{"label", *e.label()}} : Json()};
  } catch (const ConversationParseError& e) {
    return {422, "unparseable_output", e.what(), e.label() ? Json{{"label", *e.label()}} : Json()};
  } catch (const VerdictParseError& e) {
    return {422, "unparseable_output", e.what(), e.key() ? Json{{"key", *e.key()}} : Json()};
  } catch (const ProviderError& e) {
    return {502, "provider_" + std::string(to_string(e.kind())), e.what(),
            Json{{"retryable", e.retryable()}, {"attempts", e.attempts}}};
  } catch (const PreconditionError& e) {
    return {422, "precondition_failed", e.what(), {}};
  } catch (const std::exception& e) {
    return {500, "internal", e.what(), {}};
  }
}

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (...) {
      const HttpError e = classify(std::current_exception());
      send(res, e.status, Json{{"code", e.code}, {"message", e.message}, {"detail", e.detail}});
    }
  };
}

std::string config_from(const Json& body, const char* key, const std::string& fallback, const Gateway& gateway) {
  const std::string id = optional_string(body, key, fallback);
  if (!gateway.registry().contains(id)) throw DataError(key, "unknown model configuration " + id);
  return id;
}

}  // namespace

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "unknown";
}

DebugSample sample_from_request(const Json& body) {
  if (body.contains("sample")) return sample_from_json(body.at("sample"));
  DebugSample s;
  s.id = optional_string(body, "sample_id", "request");
  s.problem_description = require_string(body, "problem");
  s.buggy_source = require_string(body, "bug_code");

  const Json& failed = body.contains("failed_test") ? body.at("failed_test") : Json();
  if (failed.is_object()) {
    s.failed_test = failed_test_from_json(failed);
  } else {
    const std::string sentence = require_string(body, "failed_test");
    auto parsed = parse_convention(sentence);
    s.failed_test = parsed ? *parsed : FailedTestDescription{};
    s.failed_test->sentence = sentence;
  }

  const Json& m = body.contains("misconception") ? body.at("misconception") : Json();
  if (m.is_object()) {
    s.misconception = misconception_from_json(m);
  } else {
    s.misconception.id = "request";
    s.misconception.description = require_string(body, "misconception");
  }
  return s;
}

ReasoningTrajectory trajectory_from_request(const Json& body, const std::string& sample_id) {
  ReasoningTrajectory rt;
  if (body.contains("trajectory")) {
    try {
      rt = trajectory_from_json(body.at("trajectory"));
    } catch (const DataError& e) {
      throw DataError("trajectory." + e.field(), e.detail());
    }
    if (!rt.ok()) throw PreconditionError("the trajectory failed to generate: " + *rt.error);
  } else if (body.contains("rt_text")) {
    rt.sample_id = sample_id;
    rt.steps = parse_rt(require_string(body, "rt_text"));
    rt.meta.config_id = "request";
  } else {
    throw DataError("trajectory", "required (or rt_text)");
  }
  return rt;
}

Conversation conversation_from_request(const Json& body, const std::string& sample_id, int step_count) {
  Conversation c;
  if (body.contains("conversation")) {
    try {
      c = conversation_from_json(body.at("conversation"));
    } catch (const DataError& e) {
      throw DataError("conversation." + e.field(), e.detail());
    }
    if (!c.ok()) throw PreconditionError("the conversation failed to generate: " + *c.error);
    if (auto v = validate_conversation(c.turns, step_count); !v.empty())
      throw DataError("conversation." + v.front().field, v.front().rule);
  } else if (body.contains("conversation_text")) {
    c.sample_id = sample_id;
    c.turns = parse_conversation(require_string(body, "conversation_text"), step_count);
    c.meta.config_id = "request";
  } else {
    throw DataError("conversation", "required (or conversation_text)");
  }
  return c;
}

Service::Service(Gateway& gateway, ServiceOptions options)
    : gateway_(gateway), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() {
  stop();
  for (auto& w : workers_)
    if (w.joinable()) w.join();
}

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
  } else if (!server_->bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  server_->listen_after_bind();
}

void Service::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::optional<ApiJob> Service::job(const std::string& id) const {
  std::lock_guard lock(jobs_mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

void Service::run_job(const std::string& id, std::vector<DebugSample> corpus, BenchmarkOptions options) {
  {
    std::lock_guard lock(jobs_mu_);
    jobs_[id].status = JobStatus::running;
  }
  try {
    auto run = run_benchmark(gateway_, corpus, options);
    const auto manifest_path = options.out_dir / "manifest.json";
    run.manifest["artifact_root"] = ".";
    jsonl::write_file(manifest_path, run.manifest.dump(1) + "\n");
    std::lock_guard lock(jobs_mu_);
    jobs_[id].result = Json{{"report", to_json(run.report)}, {"manifest", manifest_path.string()}};
    jobs_[id].status = JobStatus::done;
  } catch (const std::exception& e) {
    std::lock_guard lock(jobs_mu_);
    jobs_[id].error = e.what();
    jobs_[id].status = JobStatus::failed;
  }
}

void Service::routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
          send(res, 200, Json{{"status", "ok"}, {"schema_version", kSchemaVersion}});
        }));

  s.Get("/models", guarded([this](const httplib::Request&, httplib::Response& res) {
          Json configs = Json::array();
          for (const auto& c : gateway_.registry().configs()) configs.push_back(to_json(c));
          send(res, 200,
               Json{{"configurations", configs},
                    {"defaults", {{"generation", options_.default_config}, {"judge", options_.judge_config}}}});
        }));

  s.Post("/generate/rt", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const Json body = parse_body(req);
           const auto sample = sample_from_request(body);
           const auto config = config_from(body, "config_id", options_.default_config, gateway_);
           const auto rt = generate_rt(gateway_, sample, config);
           send(res, 200,
                Json{{"config_id", rt.meta.config_id},
                     {"prompt_version", rt.meta.prompt_version},
                     {"trajectory", to_json(rt)},
                     {"text", render_rt(rt.steps)}});
         }));

  s.Post("/generate/conversation", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const Json body = parse_body(req);
           const auto sample = sample_from_request(body);
           const auto rt = trajectory_from_request(body, sample.id);
           const auto config = config_from(
               body, "config_id", rt.meta.config_id == "request" ? options_.default_config : rt.meta.config_id,
               gateway_);
           const auto c = generate_conversation(gateway_, sample, rt, config);
           send(res, 200,
                Json{{"config_id", c.meta.config_id},
                     {"prompt_version", c.meta.prompt_version},
                     {"conversation", to_json(c)},
                     {"text", render_conversation(c.turns, RenderMode::plain)}});
         }));

  s.Post("/judge/rt", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const Json body = parse_body(req);
           const auto sample = sample_from_request(body);
           const auto rt = trajectory_from_request(body, sample.id);
           const auto judge = config_from(body, "judge_config_id", options_.judge_config, gateway_);
           const auto v = judge_rt(gateway_, sample, rt, judge);
           send(res, 200,
                Json{{"config_id", v.meta.judge_config_id},
                     {"prompt_version", v.meta.prompt_version},
                     {"verdict", to_json(v)}});
         }));

  s.Post("/judge/turn", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const Json body = parse_body(req);
           const auto sample = sample_from_request(body);
           const auto rt = trajectory_from_request(body, sample.id);
           const auto c = conversation_from_request(body, sample.id, static_cast<int>(rt.steps.size()));
           if (!body.contains("turn_index") || !body.at("turn_index").is_number_integer())
             throw DataError("turn_index", "expected an integer");
           const long long index = body.at("turn_index").get<long long>();
           if (index < 0 || index >= static_cast<long long>(c.turns.size()))
             throw DataError("turn_index", "out of range");
           const auto judge = config_from(body, "judge_config_id", options_.judge_config, gateway_);
           const auto v = judge_turn(gateway_, sample, rt, c, static_cast<std::size_t>(index), judge);
           send(res, 200,
                Json{{"config_id", v.meta.judge_config_id},
                     {"prompt_version", v.meta.prompt_version},
                     {"verdict", to_json(v)}});
         }));

  s.Post("/benchmark", guarded([this](const httplib::Request& req, httplib::Response& res) {
           if (options_.jobs_dir.empty())
             throw HttpError{503, "unavailable", "benchmark jobs are disabled; start the service with a jobs dir", {}};
           const Json body = parse_body(req);
           std::vector<DebugSample> corpus;
           if (body.contains("corpus_path")) {
             corpus = load_dataset(require_string(body, "corpus_path"));
           } else if (body.contains("corpus") && body.at("corpus").is_array()) {
             for (const auto& j : body.at("corpus")) corpus.push_back(sample_from_json(j));
           } else {
             throw DataError("corpus", "required (array of samples, or corpus_path)");
           }
           BenchmarkOptions options;
           if (!body.contains("configs") || !body.at("configs").is_array()) throw DataError("configs", "expected an array");
           for (const auto& c : body.at("configs")) {
             if (!c.is_string() || !gateway_.registry().contains(c.get<std::string>()))
               throw DataError("configs", "unknown model configuration " + c.dump());
             options.configs.push_back(c.get<std::string>());
           }
           options.judge_config = config_from(body, "judge_config_id", options_.judge_config, gateway_);
           options.jobs = options_.jobs;
           const std::string id = "job-" + std::to_string(next_job_++);
           options.out_dir = options_.jobs_dir / id;
           {
             std::lock_guard lock(jobs_mu_);
             jobs_[id] = ApiJob{id, "benchmark", JobStatus::queued, std::nullopt, std::nullopt};
             workers_.emplace_back(&Service::run_job, this, id, std::move(corpus), std::move(options));
           }
           send(res, 202, Json{{"job_id", id}, {"status", "queued"}});
         }));

  s.Get(R"(/jobs/([-\w]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto j = job(req.matches[1]);
          if (!j) throw HttpError{404, "not_found", "no job " + std::string(req.matches[1]), {}};
          Json out{{"job_id", j->job_id}, {"kind", j->kind}, {"status", std::string(to_string(j->status))}};
          if (j->result) out["result"] = *j->result;
          if (j->error) out["error"] = *j->error;
          send(res, 200, out);
        }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty())
      send(res, 404, Json{{"code", "not_found"}, {"message", "no such endpoint"}, {"detail", nullptr}});
  });
}

}  // namespace socdbg
