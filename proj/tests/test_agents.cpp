#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "pforest/agents.hpp"
#include "pforest/errors.hpp"
#include "pforest/jsonl.hpp"
#include "test_support.hpp"

using namespace pforest;
using testsupport::TempDir;

namespace {

ChatRequest make_request(const std::string& prompt = "What is 2+2?", uint64_t seed = 7) {
  ChatRequest r;
  r.model = "toy-model";
  r.prompt = prompt;
  r.temperature = 0.7;
  r.top_p = 0.95;
  r.max_tokens = 2048;
  r.seed = seed;
  return r;
}

/// Succeeds with a response derived from the request seed. Stateless, so it
/// is trivially thread safe.
class EchoBackend : public Backend {
 public:
  CompletionResult complete(const ChatRequest& request) override {
    CompletionResult out;
    out.ok = true;
    out.text = "The final answer is \\boxed{" + std::to_string(request.seed) + "}";
    return out;
  }
};

/// Fails transiently `failures` times per distinct request, then succeeds.
class FlakyBackend : public Backend {
 public:
  explicit FlakyBackend(int failures) : failures_(failures) {}

  CompletionResult complete(const ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(mu_);
    ++calls_;
    int& seen = attempts_[request_digest(request)];
    CompletionResult out;
    if (seen++ < failures_) {
      out.transient = true;
      out.error = "synthetic outage";
      return out;
    }
    out.ok = true;
    out.text = "\\boxed{" + std::to_string(request.seed) + "}";
    return out;
  }

  int calls() const { return calls_; }

 private:
  std::mutex mu_;
  std::map<std::string, int> attempts_;
  int failures_;
  int calls_{0};
};

/// Always fails with a non-retryable error.
class BrokenBackend : public Backend {
 public:
  CompletionResult complete(const ChatRequest&) override {
    ++calls;
    CompletionResult out;
    out.error = "model not found";
    return out;
  }
  std::atomic<int> calls{0};
};

SampleJob make_job(const std::string& qid, int n, uint64_t seed_base, int retry_limit = 3) {
  SampleJob job;
  job.question_id = qid;
  job.condition = "clean";
  job.prompt = "solve " + qid;
  job.model = "toy-model";
  job.n_samples = n;
  job.params.seed_base = seed_base;
  job.retry_limit = retry_limit;
  return job;
}

}  // namespace

TEST_CASE("prompt templates") {
  SUBCASE("grade-school and word-problem sets share the numeric template") {
    CHECK(prompt_template(Dataset::Gsm8k) == prompt_template(Dataset::MultiArith));
    CHECK(prompt_template(Dataset::Gsm8k).find("{question}") != std::string::npos);
    CHECK(prompt_template(Dataset::Gsm8k).find("\\boxed{answer}") != std::string::npos);
  }
  SUBCASE("the latex template asks for the simplest exact value") {
    const std::string t = prompt_template(Dataset::Math);
    CHECK(t.find("{question}") != std::string::npos);
    CHECK(t.find("LaTeX") != std::string::npos);
    CHECK(t.find("simplest") != std::string::npos);
    CHECK(t != prompt_template(Dataset::Gsm8k));
  }
  SUBCASE("the multiple-choice template pins the letter format") {
    const std::string t = prompt_template(Dataset::MmluMath);
    CHECK(t.find("{question}") != std::string::npos);
    CHECK(t.find("\\boxed{(A)}") != std::string::npos);
    CHECK(t.find("D") != std::string::npos);
  }
  SUBCASE("question text is spliced verbatim, noise included") {
    const std::string noisy = "What , is ; 2+2 ?";
    const std::string p = build_prompt(noisy, Dataset::Gsm8k);
    CHECK(p.find(noisy) != std::string::npos);
    CHECK(p.find("{question}") == std::string::npos);
    // a question that itself contains the placeholder token stays literal
    const std::string tricky = "define {question} in your own words";
    CHECK(build_prompt(tricky, Dataset::Gsm8k).find(tricky) != std::string::npos);
  }
}

TEST_CASE("request digests identify requests exactly") {
  const ChatRequest base = make_request();
  const std::string d = request_digest(base);
  REQUIRE(d.size() == 16);
  for (char c : d) CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
  CHECK(request_digest(base) == d);

  // value pinned against an independent out-of-process hash of the canonical
  // request body; a serialization change would silently orphan replay stores
  CHECK(d == "e583fcb77d0b98b0");

  auto differs = [&](ChatRequest r) { return request_digest(r) != d; };
  ChatRequest r = base;
  r.model = "other";
  CHECK(differs(r));
  r = base;
  r.prompt = "What is 2+3?";
  CHECK(differs(r));
  r = base;
  r.temperature = 0.8;
  CHECK(differs(r));
  r = base;
  r.top_p = 0.9;
  CHECK(differs(r));
  r = base;
  r.max_tokens = 1024;
  CHECK(differs(r));
  r = base;
  r.seed = 8;
  CHECK(differs(r));
}

TEST_CASE("replay stores serve canned completions by digest") {
  TempDir dir;
  const ChatRequest r1 = make_request("prompt one", 1);
  const ChatRequest r2 = make_request("prompt two", 2);
  append_replay_entry(dir.file("a.jsonl"), request_digest(r1), "canned one");
  append_replay_entry(dir.file("b.jsonl"), request_digest(r2), "canned two");

  ReplayBackend store(dir.str());
  CHECK(store.size() == 2);
  CompletionResult hit = store.complete(r1);
  CHECK(hit.ok);
  CHECK(hit.text == "canned one");
  CHECK(store.complete(r2).text == "canned two");

  SUBCASE("a miss fails permanently so retries cannot stall a replay run") {
    CompletionResult miss = store.complete(make_request("prompt three", 3));
    CHECK_FALSE(miss.ok);
    CHECK_FALSE(miss.transient);
    CHECK(miss.error.find(request_digest(make_request("prompt three", 3))) !=
          std::string::npos);
  }
  SUBCASE("a single file is a valid store") {
    ReplayBackend one(dir.file("a.jsonl"));
    CHECK(one.size() == 1);
    CHECK(one.complete(r1).ok);
  }
  SUBCASE("colliding digests across files are an error") {
    append_replay_entry(dir.file("c.jsonl"), request_digest(r1), "conflicting");
    CHECK_THROWS_WITH_AS(ReplayBackend(dir.str()), doctest::Contains("duplicate"),
                         ValidationError);
  }
}

TEST_CASE("replay store path errors") {
  TempDir dir;
  CHECK_THROWS_WITH_AS(ReplayBackend(dir.file("nope")), doctest::Contains("not found"),
                       ValidationError);
  CHECK_THROWS_AS(ReplayBackend(dir.str()), ValidationError);  // no .jsonl inside
}

TEST_CASE("sampling draws one completion per agent with distinct seeds") {
  EchoBackend backend;
  const QuestionSamples out = sample_agents(backend, make_job("q1", 4, 100));
  REQUIRE(out.samples.size() == 4);
  CHECK(out.failed_calls == 0);
  CHECK_FALSE(out.all_failed);
  for (int agent = 0; agent < 4; ++agent) {
    CHECK(out.samples[agent].agent_index == agent);
    CHECK(out.samples[agent].question_id == "q1");
    CHECK(out.samples[agent].condition == "clean");
    CHECK(out.samples[agent].raw_text ==
          "The final answer is \\boxed{" + std::to_string(100 + agent) + "}");
    CHECK_FALSE(out.samples[agent].canonical.has_value());  // extraction is separate
  }
}

TEST_CASE("transient failures are retried, permanent ones are not") {
  SUBCASE("an outage shorter than the retry budget heals") {
    FlakyBackend backend(2);
    const QuestionSamples out = sample_agents(backend, make_job("q1", 1, 0, 2));
    CHECK(out.failed_calls == 0);
    CHECK(out.samples[0].raw_text == "\\boxed{0}");
    CHECK(backend.calls() == 3);  // two failures, then the success
  }
  SUBCASE("an outage longer than the retry budget yields an empty sample") {
    FlakyBackend backend(5);
    const QuestionSamples out = sample_agents(backend, make_job("q1", 2, 0, 1));
    CHECK(out.failed_calls == 2);
    CHECK(out.all_failed);
    CHECK(out.samples[0].raw_text.empty());
    CHECK(out.samples[1].raw_text.empty());
    CHECK(backend.calls() == 4);  // 2 attempts per agent, no more
  }
  SUBCASE("permanent errors are never retried") {
    BrokenBackend backend;
    const QuestionSamples out = sample_agents(backend, make_job("q1", 3, 0, 5));
    CHECK(out.failed_calls == 3);
    CHECK(out.all_failed);
    CHECK(backend.calls == 3);  // one call per agent despite the retry budget
  }
  SUBCASE("partial failure is not total failure") {
    FlakyBackend backend(1);  // every request fails once; retries heal all
    const QuestionSamples healed = sample_agents(backend, make_job("q1", 3, 0, 1));
    CHECK(healed.failed_calls == 0);
    CHECK_FALSE(healed.all_failed);
  }
}

TEST_CASE("concurrent sampling equals sequential sampling") {
  std::vector<SampleJob> jobs;
  for (int i = 0; i < 12; ++i) jobs.push_back(make_job("q" + std::to_string(i), 5, i * 1000));

  EchoBackend backend;
  const auto sequential = run_sampling(backend, jobs, 1);
  const auto parallel = run_sampling(backend, jobs, 7);

  REQUIRE(sequential.size() == jobs.size());
  REQUIRE(parallel.size() == jobs.size());
  for (size_t i = 0; i < jobs.size(); ++i) {
    REQUIRE(parallel[i].samples.size() == sequential[i].samples.size());
    for (size_t a = 0; a < sequential[i].samples.size(); ++a) {
      CHECK(parallel[i].samples[a].question_id == sequential[i].samples[a].question_id);
      CHECK(parallel[i].samples[a].agent_index == sequential[i].samples[a].agent_index);
      CHECK(parallel[i].samples[a].raw_text == sequential[i].samples[a].raw_text);
    }
  }
  // results stay in job order regardless of which worker ran them
  for (size_t i = 0; i < jobs.size(); ++i)
    CHECK(parallel[i].samples[0].question_id == "q" + std::to_string(i));
}

TEST_CASE("samples round-trip through JSONL") {
  TempDir dir;
  std::vector<Sample> samples(3);
  samples[0] = {"q1", "clean", 0, "The final answer is \\boxed{42}",
                canonicalize("42", AnswerKind::Numeric)};
  samples[1] = {"q1", "clean", 1, "", CanonicalAnswer::unparseable()};
  samples[2] = {"q2", "punct30", 0, "raw text only", std::nullopt};

  const std::string path = dir.file("samples.jsonl");
  write_samples(path, samples);
  const auto back = read_samples(path);
  REQUIRE(back.size() == 3);

  CHECK(back[0].question_id == "q1");
  CHECK(back[0].agent_index == 0);
  CHECK(back[0].raw_text == "The final answer is \\boxed{42}");
  REQUIRE(back[0].canonical.has_value());
  CHECK(back[0].canonical->value() == "42");
  CHECK(answers_equal(*back[0].canonical, canonicalize("42", AnswerKind::Numeric)));

  REQUIRE(back[1].canonical.has_value());
  CHECK_FALSE(back[1].canonical->parseable());

  CHECK(back[2].condition == "punct30");
  CHECK_FALSE(back[2].canonical.has_value());
}

TEST_CASE("api key comes from the environment") {
  ::unsetenv("PERTURB_FOREST_API_KEY");
  CHECK(api_key_from_env().empty());
  ::setenv("PERTURB_FOREST_API_KEY", "sk-local-test", 1);
  CHECK(api_key_from_env() == "sk-local-test");
  ::unsetenv("PERTURB_FOREST_API_KEY");
}

// ---- live loopback server ---------------------------------------------------

namespace {

/// Serves an OpenAI-style completion endpoint on 127.0.0.1 for backend tests.
class LoopbackServer {
 public:
  LoopbackServer() {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   handle(req, res, /*flaky=*/false);
                 });
    server_.Post("/flaky", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res, /*flaky=*/true);
    });
    server_.Post("/garbled", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("this is not json", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LoopbackServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint(const std::string& path = "") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

  int flaky_calls() const { return flaky_calls_.load(); }

 private:
  void handle(const httplib::Request& req, httplib::Response& res, bool flaky) {
    if (flaky && flaky_calls_.fetch_add(1) < 2) {
      res.status = 503;
      res.set_content("{\"error\":\"overloaded\"}", "application/json");
      return;
    }
    if (req.get_header_value("Authorization") != "Bearer test-key-123") {
      res.status = 401;
      res.set_content("{\"error\":\"bad key\"}", "application/json");
      return;
    }
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("seed")) {
      res.status = 400;
      res.set_content("{\"error\":\"bad request\"}", "application/json");
      return;
    }
    const uint64_t seed = body["seed"].get<uint64_t>();
    json reply{{"choices",
                json::array({json{{"message",
                                   json{{"role", "assistant"},
                                        {"content", "The final answer is \\boxed{" +
                                                        std::to_string(seed) + "}"}}}}})}};
    res.set_content(reply.dump(), "application/json");
  }

  httplib::Server server_;
  std::thread thread_;
  int port_{0};
  std::atomic<int> flaky_calls_{0};
};

}  // namespace

TEST_CASE("the http backend talks to a real local server") {
  LoopbackServer server;

  SUBCASE("a bearer-authenticated request round-trips") {
    HttpBackend backend(server.endpoint(), "test-key-123", 5);
    CompletionResult res = backend.complete(make_request("ping", 77));
    REQUIRE(res.ok);
    CHECK(res.text == "The final answer is \\boxed{77}");
  }
  SUBCASE("a missing key is a permanent authentication failure") {
    HttpBackend backend(server.endpoint(), "", 5);
    CompletionResult res = backend.complete(make_request());
    CHECK_FALSE(res.ok);
    CHECK_FALSE(res.transient);
    CHECK(res.error.find("401") != std::string::npos);
  }
  SUBCASE("server errors are transient and retries heal them") {
    HttpBackend backend(server.endpoint("/flaky"), "test-key-123", 5);
    SampleJob job = make_job("q1", 1, 9, 3);
    const QuestionSamples out = sample_agents(backend, job);
    CHECK(out.failed_calls == 0);
    CHECK(out.samples[0].raw_text == "The final answer is \\boxed{9}");
    CHECK(server.flaky_calls() == 3);  // 503, 503, then 200
  }
  SUBCASE("an unknown route is permanent") {
    HttpBackend backend(server.endpoint("/missing"), "test-key-123", 5);
    CompletionResult res = backend.complete(make_request());
    CHECK_FALSE(res.ok);
    CHECK_FALSE(res.transient);
    CHECK(res.error.find("404") != std::string::npos);
  }
  SUBCASE("a 200 with an unusable body is permanent") {
    HttpBackend backend(server.endpoint("/garbled"), "test-key-123", 5);
    CompletionResult res = backend.complete(make_request());
    CHECK_FALSE(res.ok);
    CHECK_FALSE(res.transient);
    CHECK(res.error.find("malformed") != std::string::npos);
  }
}

TEST_CASE("an unreachable endpoint is a transient connection failure") {
  HttpBackend backend("http://127.0.0.1:1", "", 1);
  CompletionResult res = backend.complete(make_request());
  CHECK_FALSE(res.ok);
  CHECK(res.transient);
  CHECK_FALSE(res.error.empty());
}

TEST_CASE("endpoint parsing") {
  CHECK_THROWS_AS(HttpBackend("localhost:8000", ""), ValidationError);
  CHECK_NOTHROW(HttpBackend("http://localhost:8000", ""));
  CHECK_NOTHROW(HttpBackend("http://localhost:8000/", ""));
  CHECK_NOTHROW(HttpBackend("http://localhost:8000/v2/custom", ""));
}
