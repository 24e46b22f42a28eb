#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pforest/corpus.hpp"
#include "pforest/extraction.hpp"

namespace pforest {

/// Decoding parameters shared by every request of a run. seed_base is the
/// seed of agent 0; agent i uses seed_base + i, so the 25 requests for one
/// question are identical except for their seeds.
struct DecodeParams {
  double temperature{0.7};
  double top_p{0.95};
  int max_tokens{2048};
  uint64_t seed_base{0};
};

/// One completion drawn for one question under one condition. raw_text is
/// empty when the backend permanently failed; extraction then yields an
/// unparseable answer, which can never win a vote.
struct Sample {
  std::string question_id;
  std::string condition;
  int agent_index{0};
  std::string raw_text;
  std::optional<CanonicalAnswer> canonical;
};

struct ChatRequest {
  std::string model;
  std::string prompt;
  double temperature{0.7};
  double top_p{0.95};
  int max_tokens{2048};
  uint64_t seed{0};
};

/// Stable fingerprint of a request (model, message, decode params, seed),
/// used as the lookup key of the replay store.
std::string request_digest(const ChatRequest& request);

struct CompletionResult {
  bool ok{false};
  std::string text;
  bool transient{false};  // retryable: timeouts, connection drops, 429, 5xx
  std::string error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const ChatRequest& request) = 0;
};

/// POSTs OpenAI-style chat completions to <endpoint>/v1/chat/completions
/// (or to the endpoint's own path when one is given). Thread safe: each call
/// opens its own connection.
class HttpBackend : public Backend {
 public:
  HttpBackend(std::string endpoint, std::string api_key, int timeout_seconds = 120);
  CompletionResult complete(const ChatRequest& request) override;

 private:
  std::string host_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
  int timeout_seconds_;
};

/// Value of PERTURB_FOREST_API_KEY, or "" when unset.
std::string api_key_from_env();

/// Replays canned completions from a directory of JSONL files with
/// {"digest","response"} records. A request whose digest is not in the store
/// fails permanently (no retries), so gaps surface as unparseable samples.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::string& store_dir);
  CompletionResult complete(const ChatRequest& request) override;
  size_t size() const { return responses_.size(); }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

/// Appends one canned completion to a replay store file.
void append_replay_entry(const std::string& file, const std::string& digest,
                         const std::string& response);

/// Instruction template for a dataset, with a {question} placeholder.
std::string prompt_template(Dataset d);

/// Splices the (possibly perturbed) question text into the dataset template.
/// The text is inserted verbatim, noise and all.
std::string build_prompt(std::string_view question_text, Dataset d);

struct SampleJob {
  std::string question_id;
  std::string condition;
  std::string prompt;
  std::string model;
  int n_samples{25};
  DecodeParams params;
  int retry_limit{3};
};

struct QuestionSamples {
  std::vector<Sample> samples;  // exactly n_samples, ordered by agent_index
  int failed_calls{0};
  bool all_failed{false};
};

/// Draws job.n_samples completions, one per agent index. Transient failures
/// are retried up to job.retry_limit extra attempts; permanent failures (and
/// exhausted retries) yield an empty-text sample rather than aborting the run.
QuestionSamples sample_agents(Backend& backend, const SampleJob& job);

/// Runs jobs with a bounded worker pool. Results are in job order regardless
/// of scheduling.
std::vector<QuestionSamples> run_sampling(Backend& backend,
                                          const std::vector<SampleJob>& jobs,
                                          int concurrency);

/// Samples JSONL: {"question_id","condition","agent_index","raw_text"} plus
/// "canonical_kind"/"canonical_value" once extraction has run.
void write_samples(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> read_samples(const std::string& path);

}  // namespace pforest
