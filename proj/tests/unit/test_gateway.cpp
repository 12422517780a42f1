#include <httplib.h>

#include <doctest.h>

#include <filesystem>
#include <random>
#include <thread>

#include "socdbg/assets.hpp"
#include "socdbg/gateway.hpp"
#include "published_configs.hpp"
#include "test_support.hpp"

using namespace socdbg;
using namespace socdbg::testing;
using std::chrono::milliseconds;

namespace {

struct SleepLog {
  std::shared_ptr<std::vector<milliseconds>> sleeps = std::make_shared<std::vector<milliseconds>>();
  RetryPolicy policy(std::uint64_t seed = 7) const {
    RetryPolicy p;
    p.seed = seed;
    auto log = sleeps;
    p.sleep = [log](milliseconds d) { log->push_back(d); };
    return p;
  }
};

GenerationRequest req(std::string prompt, std::string tag, std::string config = "gpt-5-low") {
  return GenerationRequest{std::move(prompt), std::move(config), std::move(tag), std::nullopt};
}

std::shared_ptr<MockTransport> echo(milliseconds delay = milliseconds(0)) {
  return std::make_shared<MockTransport>([](const GenerationRequest& r, int) { return "echo " + r.prompt; }, delay);
}

template <class F>
void check_data_error(F&& f, const std::string& field) {
  try {
    f();
    FAIL("expected DataError for " << field);
  } catch (const DataError& e) {
    CHECK(e.field() == field);
  }
}

}  // namespace

TEST_CASE("registry holds the 14 configurations and the judge profile as published") {
  const auto& reg = ModelRegistry::builtin();
  REQUIRE(reg.configs().size() == 14);
  for (std::size_t i = 0; i < 14; ++i) {
    CAPTURE(kPublishedConfigs[i].id);
    CHECK(reg.configs()[i] == expected(kPublishedConfigs[i]));
    CHECK(validate_config(reg.configs()[i]).empty());
  }
  REQUIRE(reg.profiles().size() == 1);
  const ModelConfig& judge = reg.default_for("judge");
  CHECK(judge.config_id == "judge-claude-sonnet-4-5");
  CHECK(judge.model_name == "claude-sonnet-4-5");
  CHECK(judge.temperature == 1.0);
  CHECK(judge.max_output_tokens == 8000);
  CHECK(judge.reasoning_enabled);
  CHECK(judge.profile == "judge");

  const ModelConfig& describer = reg.default_for("describer");
  CHECK(describer.config_id == "claude-sonnet-4-5");
  CHECK(describer.temperature == 0.1);
  CHECK_FALSE(describer.reasoning_enabled);
  CHECK(describer.max_output_tokens == 4000);
}

TEST_CASE("resolve_config reproduces every registered configuration") {
  for (const Row& r : kPublishedConfigs) {
    CAPTURE(r.id);
    CHECK(resolve_config(r.model, flags_for(r)) == expected(r));
  }
  ReasoningFlags judge;
  judge.profile = "judge";
  CHECK(resolve_config("claude-sonnet-4-5", judge) == ModelRegistry::builtin().find("judge-claude-sonnet-4-5"));
}

TEST_CASE("resolve_config examples") {
  ReasoningFlags medium;
  medium.level = "medium";
  auto gpt = resolve_config("gpt-5", medium);
  CHECK(gpt.max_output_tokens == 4000);
  CHECK(gpt.verbosity == "medium");
  CHECK_FALSE(gpt.temperature.has_value());

  ReasoningFlags thinking;
  thinking.reasoning = true;
  auto sonnet = resolve_config("claude-sonnet-4-5", thinking);
  CHECK(sonnet.temperature == 1.0);
  CHECK(sonnet.max_output_tokens == 6000);
  CHECK(sonnet.thinking_budget_tokens == 2000);

  auto pro = resolve_config("gemini-2.5-pro", {});
  CHECK(pro.temperature == 0.1);
  CHECK(pro.max_output_tokens == 4000);
  CHECK_FALSE(pro.thinking_budget_tokens.has_value());
}

TEST_CASE("resolve_config rejects unsupported combinations") {
  ReasoningFlags f;
  f.level = "low";
  f.temperature = 0.2;
  CHECK_THROWS_AS(resolve_config("gpt-5", f), ValidationError);

  ReasoningFlags high;
  high.level = "high";
  CHECK_THROWS_AS(resolve_config("gpt-5", high), ValidationError);
  CHECK_THROWS_AS(resolve_config("gpt-5-mini", {}), ValidationError);
  CHECK_THROWS_AS(resolve_config("llama-3", {}), ValidationError);

  ReasoningFlags hot;
  hot.reasoning = true;
  hot.temperature = 0.5;
  CHECK_THROWS_AS(resolve_config("claude-haiku-4-5", hot), ValidationError);

  ReasoningFlags level_on_claude;
  level_on_claude.level = "low";
  CHECK_THROWS_AS(resolve_config("claude-sonnet-4-5", level_on_claude), ValidationError);

  ReasoningFlags judge;
  judge.profile = "judge";
  CHECK_THROWS_AS(resolve_config("gemini-2.5-pro", judge), ValidationError);
  judge.profile = "critic";
  CHECK_THROWS_AS(resolve_config("claude-sonnet-4-5", judge), ValidationError);
}

TEST_CASE("user-defined configurations get their own id") {
  ReasoningFlags f;
  f.temperature = 0.7;
  auto c = resolve_config("gemini-2.5-flash", f);
  CHECK(c.config_id == "gemini-2.5-flash-t0.7");
  CHECK(validate_config(c).empty());
  CHECK_FALSE(ModelRegistry::builtin().contains(c.config_id));
}

TEST_CASE("validate_config flags each provider rule") {
  auto has = [](const ModelConfig& c, const std::string& field) {
    for (const auto& v : validate_config(c))
      if (v.field == field) return true;
    return false;
  };
  auto gpt = ModelRegistry::builtin().find("gpt-5-low");
  gpt.temperature = 0.1;
  CHECK(has(gpt, "temperature"));
  gpt = ModelRegistry::builtin().find("gpt-5-low");
  gpt.reasoning_level = "high";
  CHECK(has(gpt, "reasoning_level"));

  auto claude = ModelRegistry::builtin().find("claude-sonnet-4-5-thinking");
  claude.thinking_budget_tokens = 6000;
  CHECK(has(claude, "thinking_budget_tokens"));
  claude = ModelRegistry::builtin().find("claude-sonnet-4-5-thinking");
  claude.temperature = 0.1;
  CHECK(has(claude, "temperature"));

  auto gemini = ModelRegistry::builtin().find("gemini-2.5-pro");
  gemini.include_thoughts = true;
  CHECK(has(gemini, "include_thoughts"));
  gemini = ModelRegistry::builtin().find("gemini-2.5-pro");
  gemini.provider = Provider::anthropic;
  CHECK(has(gemini, "model_name"));
}

TEST_CASE("registry file validation names the field") {
  Json doc = Json::parse(assets::get("models.json"));
  CHECK(ModelRegistry::from_json(doc).configs().size() == 14);

  Json dup = doc;
  dup["configurations"][1]["config_id"] = "gpt-5-minimal";
  check_data_error([&] { ModelRegistry::from_json(dup); }, "configurations[1].config_id");

  Json bad_temp = doc;
  bad_temp["configurations"][0]["temperature"] = 0.1;
  check_data_error([&] { ModelRegistry::from_json(bad_temp); }, "configurations[0].temperature");

  Json unknown_key = doc;
  unknown_key["profiles"][0]["seed"] = 1;
  check_data_error([&] { ModelRegistry::from_json(unknown_key); }, "profiles[0].seed");

  Json bad_default = doc;
  bad_default["defaults"]["judge"] = "nope";
  check_data_error([&] { ModelRegistry::from_json(bad_default); }, "defaults.judge");

  CHECK(ModelRegistry::load(std::filesystem::path(SOCDBG_DATA) / "models.json").configs() ==
        ModelRegistry::builtin().configs());
}

TEST_CASE("request hashing") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  auto a = req("p", "t1");
  auto b = req("p", "t2");
  CHECK(request_hash(a) == request_hash(b));  // the tag is not part of the key
  CHECK(request_hash(a) == sha256_hex("gpt-5-low\np"));
  b.config_id = "gpt-5-medium";
  CHECK(request_hash(a) != request_hash(b));
  auto c = a;
  c.system = "s";
  CHECK(request_hash(a) != request_hash(c));
}

TEST_CASE("replay returns the stored response byte for byte and never retries a miss") {
  const std::string stored = "Step A.1: line one\n  with trailing spaces  \n\xc3\xa9";
  auto hit = req("prompt one", "s1");
  CassetteEntry e{request_hash(hit), hit.config_id, "original-tag", stored, std::string("thought"), {11, 22, 3}};
  auto replay = std::make_shared<ReplayTransport>(std::vector<CassetteEntry>{e});
  SleepLog log;
  Gateway g(replay, ModelRegistry::builtin(), log.policy());

  auto r = g.generate(hit);
  CHECK(r.text == stored);
  CHECK(r.reasoning == "thought");
  CHECK(r.usage == Usage{11, 22, 3});
  CHECK(r.tag == "s1");
  CHECK(r.retry_count == 0);
  CHECK(g.generate(hit) == r);

  try {
    g.generate(req("unrecorded", "s2"));
    FAIL("expected a replay miss");
  } catch (const ProviderError& err) {
    CHECK(err.kind() == ErrorKind::replay_miss);
    CHECK(err.attempts == 1);
    CHECK(std::string(err.what()).find("s2") != std::string::npos);
  }
  CHECK(log.sleeps->empty());
}

TEST_CASE("recording then replaying gives identical responses") {
  testing::TempDir dir;
  const auto cassette = dir.path() / "c.jsonl";
  auto script = [](const GenerationRequest& r, int) { return "answer to " + r.prompt + "\n"; };
  Gateway live(std::make_shared<RecordingTransport>(std::make_shared<MockTransport>(script), cassette));
  std::vector<GenerationRequest> reqs = {req("a", "1"), req("b", "2", "claude-sonnet-4-5"), req("c", "3")};
  std::vector<GenerationResponse> first;
  for (const auto& r : reqs) first.push_back(live.generate(r));

  auto replay = std::make_shared<ReplayTransport>(cassette);
  CHECK(replay->size() == 3);
  Gateway offline(replay);
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    auto again = offline.generate(reqs[i]);
    CHECK(again.text == first[i].text);
    CHECK(again.usage == first[i].usage);
  }
}

TEST_CASE("cassette reader is strict") {
  testing::TempDir dir;
  const auto path = dir.path() / "bad.jsonl";
  const std::string good = to_json(CassetteEntry{sha256_hex("x"), "gpt-5-low", "", "t", {}, {}}).dump();
  testing::write_text(path, good + "\n{\"request_hash\":\"abc\",\"config_id\":\"x\",\"response\":{\"text\":\"\"}}\n");
  try {
    ReplayTransport t(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.field() == "request_hash");
    CHECK(e.line() == 2u);
  }
}

TEST_CASE("rate limit twice then success gives retry_count 2") {
  auto mock = std::make_shared<MockTransport>([](const GenerationRequest&, int attempt) -> std::string {
    if (attempt < 2) throw ProviderError(ErrorKind::rate_limit, "slow down");
    return "ok";
  });
  SleepLog log;
  Gateway g(mock, ModelRegistry::builtin(), log.policy());
  auto r = g.generate(req("p", "t"));
  CHECK(r.text == "ok");
  CHECK(r.retry_count == 2);
  CHECK(mock->calls() == 3);
  REQUIRE(log.sleeps->size() == 2);
  // base 1000 ms doubling, jitter in [0.5, 1]
  CHECK((*log.sleeps)[0] >= milliseconds(500));
  CHECK((*log.sleeps)[0] <= milliseconds(1000));
  CHECK((*log.sleeps)[1] >= milliseconds(1000));
  CHECK((*log.sleeps)[1] <= milliseconds(2000));
  auto u = g.usage().at("gpt-5-low");
  CHECK(u.requests == 1);
  CHECK(u.retries == 2);
  CHECK(u.failures == 0);
}

TEST_CASE("retry budget is three attempts and only transient kinds retry") {
  for (ErrorKind kind : {ErrorKind::rate_limit, ErrorKind::transient, ErrorKind::timeout}) {
    auto mock = std::make_shared<MockTransport>(
        [kind](const GenerationRequest&, int) -> std::string { throw ProviderError(kind, "x"); });
    SleepLog log;
    Gateway g(mock, ModelRegistry::builtin(), log.policy());
    try {
      g.generate(req("p", "t"));
      FAIL("expected failure");
    } catch (const ProviderError& e) {
      CHECK(e.kind() == kind);
      CHECK(e.attempts == 3);
    }
    CHECK(mock->calls() == 3);
    CHECK(log.sleeps->size() == 2);
  }
  for (ErrorKind kind : {ErrorKind::auth, ErrorKind::invalid_request, ErrorKind::empty_content}) {
    auto mock = std::make_shared<MockTransport>(
        [kind](const GenerationRequest&, int) -> std::string { throw ProviderError(kind, "x"); });
    Gateway g(mock, ModelRegistry::builtin(), SleepLog{}.policy());
    CHECK_THROWS_AS(g.generate(req("p", "t")), ProviderError);
    CHECK(mock->calls() == 1);
  }
}

TEST_CASE("backoff is reproducible for a seed and honours retry-after") {
  auto flaky = [] {
    return std::make_shared<MockTransport>([](const GenerationRequest&, int attempt) -> std::string {
      if (attempt < 2) throw ProviderError(ErrorKind::transient, "x");
      return "ok";
    });
  };
  SleepLog a, b, c;
  Gateway(flaky(), ModelRegistry::builtin(), a.policy(42)).generate(req("p", "t"));
  Gateway(flaky(), ModelRegistry::builtin(), b.policy(42)).generate(req("p", "t"));
  Gateway(flaky(), ModelRegistry::builtin(), c.policy(43)).generate(req("p", "t"));
  CHECK(*a.sleeps == *b.sleeps);
  CHECK(*a.sleeps != *c.sleeps);

  auto hinted = std::make_shared<MockTransport>([](const GenerationRequest&, int attempt) -> std::string {
    if (attempt == 0) throw ProviderError(ErrorKind::rate_limit, "x", milliseconds(5000));
    return "ok";
  });
  SleepLog h;
  Gateway(hinted, ModelRegistry::builtin(), h.policy()).generate(req("p", "t"));
  CHECK(*h.sleeps == std::vector<milliseconds>{milliseconds(5000)});
}

TEST_CASE("empty prompt and unknown configuration are validation errors") {
  auto mock = echo();
  Gateway g(mock);
  CHECK_THROWS_AS(g.generate(req("", "t")), ValidationError);
  CHECK_THROWS_AS(g.generate(req(" \n\t", "t")), ValidationError);
  CHECK_THROWS_AS(g.generate(req("p", "t", "gpt-5-high")), ValidationError);
  CHECK(mock->calls() == 0);
  CHECK(g.generate(req("p", "t", "judge-claude-sonnet-4-5")).text == "echo p");
}

TEST_CASE("batch preserves order and bounds concurrency") {
  auto mock = echo(milliseconds(30));
  Gateway g(mock);
  std::vector<GenerationRequest> reqs;
  for (int i = 0; i < 10; ++i) reqs.push_back(req("p" + std::to_string(i), "t" + std::to_string(i)));
  auto out = g.generate_batch(reqs, 3);
  REQUIRE(out.size() == 10);
  for (int i = 0; i < 10; ++i) {
    REQUIRE(out[i].response);
    CHECK(out[i].response->tag == "t" + std::to_string(i));
    CHECK(out[i].response->text == "echo p" + std::to_string(i));
  }
  CHECK(mock->peak_in_flight() <= 3);
  CHECK(mock->peak_in_flight() >= 2);

  CHECK(g.generate_batch({}, 3).empty());
  CHECK_THROWS_AS(g.generate_batch(reqs, 0), PreconditionError);
}

TEST_CASE("gateway-level limit caps concurrent batches") {
  auto mock = echo(milliseconds(20));
  Gateway g(mock, ModelRegistry::builtin(), {}, 2);
  std::vector<GenerationRequest> reqs;
  for (int i = 0; i < 6; ++i) reqs.push_back(req("p", "t" + std::to_string(i)));
  std::thread other([&] { g.generate_batch(reqs, 6); });
  g.generate_batch(reqs, 6);
  other.join();
  CHECK(mock->peak_in_flight() <= 2);
}

TEST_CASE("a terminal failure stays in its slot") {
  auto mock = std::make_shared<MockTransport>([](const GenerationRequest& r, int) -> std::string {
    if (r.tag == "bad") throw ProviderError(ErrorKind::auth, "denied");
    return "fine";
  });
  Gateway g(mock);
  std::vector<GenerationRequest> reqs = {req("a", "a"), req("b", "bad"), req("", "empty"), req("d", "d")};
  auto out = g.generate_batch(reqs, 2);
  CHECK(out[0].response->text == "fine");
  CHECK_FALSE(out[1].response);
  CHECK(out[1].error_kind == ErrorKind::auth);
  CHECK(out[2].error_kind == ErrorKind::invalid_request);
  CHECK(out[3].response->text == "fine");
  auto u = g.usage().at("gpt-5-low");
  CHECK(u.requests == 3);
  CHECK(u.failures == 1);
}

TEST_CASE("batch order holds under random interleavings") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    std::mt19937 rng(seed);
    std::vector<int> delays(24);
    for (int& d : delays) d = static_cast<int>(rng() % 8);
    auto mock = std::make_shared<MockTransport>([&](const GenerationRequest& r, int attempt) -> std::string {
      const int i = std::stoi(r.tag);
      std::this_thread::sleep_for(milliseconds(delays[i]));
      if (i % 5 == 0 && attempt == 0) throw ProviderError(ErrorKind::transient, "blip");
      if (i % 7 == 3) throw ProviderError(ErrorKind::invalid_request, "no");
      return r.prompt;
    });
    Gateway g(mock, ModelRegistry::builtin(), SleepLog{}.policy(seed));
    std::vector<GenerationRequest> reqs;
    for (int i = 0; i < 24; ++i) reqs.push_back(req("prompt " + std::to_string(i), std::to_string(i)));
    auto out = g.generate_batch(reqs, 1 + static_cast<int>(seed % 4));
    for (int i = 0; i < 24; ++i) {
      CAPTURE(i);
      if (i % 7 == 3) {
        CHECK(out[i].error_kind == ErrorKind::invalid_request);
      } else {
        REQUIRE(out[i].response);
        CHECK(out[i].response->text == "prompt " + std::to_string(i));
        CHECK(out[i].response->retry_count == (i % 5 == 0 ? 1 : 0));
      }
    }
  }
}

TEST_CASE("provider request bodies") {
  const auto& reg = ModelRegistry::builtin();
  auto r = req("hello", "t");
  r.system = "be brief";

  Json gpt = provider_request_body(reg.find("gpt-5-low"), r);
  CHECK(gpt == Json::parse(R"({"model":"gpt-5","instructions":"be brief","input":"hello","max_output_tokens":4000,
                               "reasoning":{"effort":"low"},"text":{"verbosity":"medium"}})"));
  CHECK_FALSE(gpt.contains("temperature"));

  Json claude = provider_request_body(reg.find("claude-sonnet-4-5-thinking"), r);
  CHECK(claude == Json::parse(R"({"model":"claude-sonnet-4-5","max_tokens":6000,"temperature":1.0,"system":"be brief",
                                  "messages":[{"role":"user","content":"hello"}],
                                  "thinking":{"type":"enabled","budget_tokens":2000}})"));
  CHECK_FALSE(provider_request_body(reg.find("claude-haiku-4-5"), r).contains("thinking"));

  Json judge = provider_request_body(reg.find("judge-claude-sonnet-4-5"), r);
  CHECK(judge["max_tokens"] == 8000);
  CHECK(judge["temperature"] == 1.0);

  Json gem = provider_request_body(reg.find("gemini-2.5-pro-thinking"), r);
  CHECK(gem == Json::parse(R"({"systemInstruction":{"parts":[{"text":"be brief"}]},
                               "contents":[{"role":"user","parts":[{"text":"hello"}]}],
                               "generationConfig":{"temperature":0.1,"maxOutputTokens":6000,
                                 "thinkingConfig":{"thinkingBudget":2000,"includeThoughts":true}}})"));
  CHECK_FALSE(provider_request_body(reg.find("gemini-2.5-flash"), r)["generationConfig"].contains("thinkingConfig"));
}

TEST_CASE("provider response parsing") {
  auto openai = parse_provider_response(Provider::openai, Json::parse(R"({
    "output":[{"type":"reasoning","summary":[{"type":"summary_text","text":"think"}]},
              {"type":"message","content":[{"type":"output_text","text":"Step A.1: x"}]}],
    "usage":{"input_tokens":5,"output_tokens":9,"output_tokens_details":{"reasoning_tokens":4}}})"));
  CHECK(openai.text == "Step A.1: x");
  CHECK(openai.reasoning == "think");
  CHECK(openai.usage == Usage{5, 9, 4});

  auto anthropic = parse_provider_response(Provider::anthropic, Json::parse(R"({
    "content":[{"type":"thinking","thinking":"hmm","signature":"s"},{"type":"text","text":"answer"}],
    "usage":{"input_tokens":3,"output_tokens":7}})"));
  CHECK(anthropic.text == "answer");
  CHECK(anthropic.reasoning == "hmm");
  CHECK(anthropic.usage == Usage{3, 7, 0});

  auto google = parse_provider_response(Provider::google, Json::parse(R"({
    "candidates":[{"content":{"parts":[{"text":"plan","thought":true},{"text":"out"},{"text":"put"}]}}],
    "usageMetadata":{"promptTokenCount":2,"candidatesTokenCount":6,"thoughtsTokenCount":1}})"));
  CHECK(google.text == "output");
  CHECK(google.reasoning == "plan");
  CHECK(google.usage == Usage{2, 6, 1});

  auto kind_of = [](Provider p, const char* body) {
    try {
      parse_provider_response(p, Json::parse(body));
    } catch (const ProviderError& e) {
      return std::optional<ErrorKind>(e.kind());
    }
    return std::optional<ErrorKind>();
  };
  CHECK(kind_of(Provider::anthropic, R"({"content":[{"type":"text","text":"  "}]})") == ErrorKind::empty_content);
  CHECK(kind_of(Provider::google, R"({"candidates":[]})") == ErrorKind::empty_content);
  CHECK(kind_of(Provider::openai, R"({"id":"x"})") == ErrorKind::transient);
}

TEST_CASE("http status classification") {
  CHECK(classify_http_status(401) == ErrorKind::auth);
  CHECK(classify_http_status(403) == ErrorKind::auth);
  CHECK(classify_http_status(429) == ErrorKind::rate_limit);
  CHECK(classify_http_status(408) == ErrorKind::timeout);
  CHECK(classify_http_status(500) == ErrorKind::transient);
  CHECK(classify_http_status(529) == ErrorKind::transient);
  CHECK(classify_http_status(400) == ErrorKind::invalid_request);
}

TEST_CASE("http transport against a local stand-in server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::mutex mu;
  std::vector<Json> bodies;
  std::vector<std::string> keys;
  server.Post("/v1/messages", [&](const httplib::Request& rq, httplib::Response& rs) {
    {
      std::lock_guard lock(mu);
      bodies.push_back(Json::parse(rq.body));
      keys.push_back(rq.get_header_value("x-api-key"));
    }
    if (hits++ == 0) {
      rs.status = 429;
      rs.set_header("retry-after", "0");
      rs.set_content(R"({"error":"rate"})", "application/json");
      return;
    }
    rs.set_content(R"({"content":[{"type":"text","text":"hi there"}],"usage":{"input_tokens":1,"output_tokens":2}})",
                   "application/json");
  });
  server.Post("/v1/responses", [&](const httplib::Request&, httplib::Response& rs) {
    rs.status = 401;
    rs.set_content("{}", "application/json");
  });
  server.Post(R"(/v1beta/models/([-.\w]+):generateContent)", [&](const httplib::Request& rq, httplib::Response& rs) {
    CHECK(rq.matches[1] == "gemini-2.5-pro");
    CHECK(rq.get_header_value("x-goog-api-key") == "g-key");
    rs.set_content(R"({"candidates":[{"content":{"parts":[{"text":"g"}]}}]})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread serving([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  auto keys_fn = [](Provider p) -> std::optional<std::string> {
    if (p == Provider::anthropic) return "a-key";
    if (p == Provider::google) return "g-key";
    return "o-key";
  };
  auto http = std::make_shared<HttpTransport>(Endpoints{base, base, base}, keys_fn, std::chrono::seconds(10));
  SleepLog log;
  Gateway g(http, ModelRegistry::builtin(), log.policy());

  auto r = g.generate(req("hello", "t1", "claude-sonnet-4-5"));
  CHECK(r.text == "hi there");
  CHECK(r.retry_count == 1);
  CHECK(r.usage == Usage{1, 2, 0});
  REQUIRE(log.sleeps->size() == 1);
  CHECK((*log.sleeps)[0] >= milliseconds(500));
  {
    std::lock_guard lock(mu);
    REQUIRE(bodies.size() == 2);
    CHECK(bodies[1]["temperature"] == 0.1);
    CHECK(bodies[1]["max_tokens"] == 4000);
    CHECK(keys[1] == "a-key");
  }

  try {
    g.generate(req("hello", "t2", "gpt-5-low"));
    FAIL("expected auth error");
  } catch (const ProviderError& e) {
    CHECK(e.kind() == ErrorKind::auth);
    CHECK(e.attempts == 1);
  }
  CHECK(g.generate(req("hello", "t3", "gemini-2.5-pro")).text == "g");

  server.stop();
  serving.join();

  // Nothing listens there any more.
  try {
    HttpTransport(Endpoints{base, base, base}, keys_fn, std::chrono::seconds(2))
        .send(req("x", "t"), ModelRegistry::builtin().find("gpt-5-low"));
    FAIL("expected transport error");
  } catch (const ProviderError& e) {
    CHECK(e.retryable());
  }
}

TEST_CASE("missing credentials are an auth error") {
  HttpTransport http(Endpoints{}, [](Provider) { return std::optional<std::string>(); });
  try {
    http.send(req("x", "t"), ModelRegistry::builtin().find("gemini-2.5-pro"));
    FAIL("expected auth error");
  } catch (const ProviderError& e) {
    CHECK(e.kind() == ErrorKind::auth);
    CHECK(std::string(e.what()).find("GEMINI_API_KEY") != std::string::npos);
  }
  CHECK(HttpTransport::key_variable(Provider::openai) == "OPENAI_API_KEY");
  CHECK(HttpTransport::key_variable(Provider::anthropic) == "ANTHROPIC_API_KEY");
}
