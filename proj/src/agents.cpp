#include "pforest/agents.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "pforest/errors.hpp"
#include "pforest/jsonl.hpp"

namespace pforest {

std::string request_digest(const ChatRequest& request) {
  json body{{"model", request.model},
            {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"top_p", request.top_p},
            {"max_tokens", request.max_tokens},
            {"seed", request.seed}};
  return fnv1a64_hex(body.dump());
}

HttpBackend::HttpBackend(std::string endpoint, std::string api_key, int timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
  const size_t scheme = endpoint.find("://");
  if (scheme == std::string::npos)
    throw ValidationError("endpoint must look like http://host:port, got \"" + endpoint + "\"");
  const size_t slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) {
    host_ = endpoint;
    path_ = "/v1/chat/completions";
  } else {
    host_ = endpoint.substr(0, slash);
    path_ = endpoint.substr(slash);
    if (path_ == "/") path_ = "/v1/chat/completions";
  }
}

CompletionResult HttpBackend::complete(const ChatRequest& request) {
  json body{{"model", request.model},
            {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"top_p", request.top_p},
            {"max_tokens", request.max_tokens},
            {"seed", request.seed}};

  httplib::Client client(host_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  CompletionResult out;
  if (!res) {
    out.transient = true;
    out.error = "connection failure: " + httplib::to_string(res.error());
    return out;
  }
  if (res->status == 200) {
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty() ||
        !reply["choices"][0].contains("message") ||
        !reply["choices"][0]["message"].contains("content") ||
        !reply["choices"][0]["message"]["content"].is_string()) {
      out.error = "malformed completion response";
      return out;
    }
    out.ok = true;
    out.text = reply["choices"][0]["message"]["content"].get<std::string>();
    return out;
  }
  out.transient = res->status == 429 || res->status >= 500;
  out.error = "HTTP " + std::to_string(res->status);
  return out;
}

std::string api_key_from_env() {
  const char* key = std::getenv("PERTURB_FOREST_API_KEY");
  return key ? key : "";
}

ReplayBackend::ReplayBackend(const std::string& store_dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  std::error_code ec;
  if (fs::is_regular_file(store_dir, ec)) {
    files.push_back(store_dir);
  } else if (fs::is_directory(store_dir, ec)) {
    for (const auto& entry : fs::directory_iterator(store_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
  } else {
    throw ValidationError("replay store not found: " + store_dir);
  }
  if (files.empty()) throw ValidationError("replay store has no .jsonl files: " + store_dir);
  for (const std::string& file : files) {
    for_each_jsonl(file, [&](size_t lineno, const json& obj) {
      const std::string context = file + ":" + std::to_string(lineno);
      std::string digest = require_string(obj, "digest", context);
      std::string response = require_string(obj, "response", context);
      auto [it, inserted] = responses_.emplace(std::move(digest), std::move(response));
      if (!inserted)
        throw ValidationError(context + ": duplicate digest \"" + it->first + "\"");
    });
  }
  if (responses_.empty()) throw ValidationError("replay store is empty: " + store_dir);
}

CompletionResult ReplayBackend::complete(const ChatRequest& request) {
  auto it = responses_.find(request_digest(request));
  CompletionResult out;
  if (it == responses_.end()) {
    out.error = "no canned response for digest " + request_digest(request);
    return out;  // permanent: retrying a replay miss cannot help
  }
  out.ok = true;
  out.text = it->second;
  return out;
}

void append_replay_entry(const std::string& file, const std::string& digest,
                         const std::string& response) {
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out) throw ValidationError("cannot open " + file + " for writing");
  json obj{{"digest", digest}, {"response", response}};
  out << obj.dump() << '\n';
}

std::string prompt_template(Dataset d) {
  switch (d) {
    case Dataset::Gsm8k:
    case Dataset::MultiArith:
      return "Can you solve the following math problem? {question} Explain your "
             "reasoning. Your final answer should be a single numerical number, in "
             "the form \\boxed{answer}, at the end of your response.";
    case Dataset::Math:
      return "Here is a math problem written in LaTeX: {question} Solve it step by "
             "step. If the correct answer has units, write the units outside the box "
             "in plain text. Inside \\boxed{...} put only the exact value in its "
             "simplest form (reduced fractions, simplified radicals, rationalized "
             "denominators). At the very end of your response, output exactly one "
             "line: \\boxed{<simplest_exact_value>}. Do not add any commentary after "
             "that line.";
    case Dataset::MmluMath:
      return "Can you answer the following question as accurately as possible? "
             "Question: {question} Briefly explain your reasoning. Choose only one "
             "of A, B, C, or D. At the end, output only one final answer in the form "
             "\\boxed{(A)}, \\boxed{(B)}, \\boxed{(C)}, or \\boxed{(D)}. Do not add "
             "anything else after the answer.";
  }
  return "{question}";
}

std::string build_prompt(std::string_view question_text, Dataset d) {
  std::string out = prompt_template(d);
  const std::string placeholder = "{question}";
  const size_t hit = out.find(placeholder);
  if (hit == std::string::npos) return out;
  out.replace(hit, placeholder.size(), question_text);
  return out;
}

QuestionSamples sample_agents(Backend& backend, const SampleJob& job) {
  QuestionSamples out;
  out.samples.reserve(static_cast<size_t>(job.n_samples));
  for (int agent = 0; agent < job.n_samples; ++agent) {
    ChatRequest req;
    req.model = job.model;
    req.prompt = job.prompt;
    req.temperature = job.params.temperature;
    req.top_p = job.params.top_p;
    req.max_tokens = job.params.max_tokens;
    req.seed = job.params.seed_base + static_cast<uint64_t>(agent);

    std::string text;
    bool ok = false;
    for (int attempt = 0; attempt <= job.retry_limit; ++attempt) {
      CompletionResult res = backend.complete(req);
      if (res.ok) {
        text = std::move(res.text);
        ok = true;
        break;
      }
      if (!res.transient) break;
    }
    if (!ok) ++out.failed_calls;

    Sample s;
    s.question_id = job.question_id;
    s.condition = job.condition;
    s.agent_index = agent;
    s.raw_text = std::move(text);
    out.samples.push_back(std::move(s));
  }
  out.all_failed = out.failed_calls == job.n_samples;
  return out;
}

std::vector<QuestionSamples> run_sampling(Backend& backend,
                                          const std::vector<SampleJob>& jobs,
                                          int concurrency) {
  std::vector<QuestionSamples> results(jobs.size());
  if (jobs.empty()) return results;
  const size_t workers =
      std::min<size_t>(std::max(concurrency, 1), jobs.size());
  if (workers == 1) {
    for (size_t i = 0; i < jobs.size(); ++i) results[i] = sample_agents(backend, jobs[i]);
    return results;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        results[i] = sample_agents(backend, jobs[i]);
      }
    });
  }
  for (std::thread& t : pool) t.join();
  return results;
}

void write_samples(const std::string& path, const std::vector<Sample>& samples) {
  std::ostringstream out;
  for (const Sample& s : samples) {
    json obj{{"question_id", s.question_id},
             {"condition", s.condition},
             {"agent_index", s.agent_index},
             {"raw_text", s.raw_text}};
    if (s.canonical) {
      obj["canonical_kind"] = to_string(s.canonical->kind());
      obj["canonical_value"] = s.canonical->value();
    }
    out << obj.dump() << '\n';
  }
  write_file(path, out.str());
}

std::vector<Sample> read_samples(const std::string& path) {
  std::vector<Sample> samples;
  for_each_jsonl(path, [&](size_t lineno, const json& obj) {
    const std::string context = path + ":" + std::to_string(lineno);
    Sample s;
    s.question_id = require_string(obj, "question_id", context);
    s.condition = require_string(obj, "condition", context);
    if (!obj.contains("agent_index") || !obj["agent_index"].is_number_integer())
      throw ValidationError(context + ": missing integer field \"agent_index\"");
    s.agent_index = obj["agent_index"].get<int>();
    s.raw_text = require_string(obj, "raw_text", context);
    if (obj.contains("canonical_kind")) {
      auto kind = parse_canonical_kind(require_string(obj, "canonical_kind", context));
      if (!kind) throw ValidationError(context + ": unknown canonical kind");
      const std::string value = obj.value("canonical_value", std::string());
      if (*kind == CanonicalKind::Unparseable) {
        s.canonical = CanonicalAnswer::unparseable();
      } else if (*kind == CanonicalKind::Choice) {
        s.canonical = canonicalize(value, AnswerKind::Choice);
      } else {
        s.canonical = canonicalize(value, AnswerKind::Numeric);
      }
    }
    samples.push_back(std::move(s));
  });
  return samples;
}

}  // namespace pforest
