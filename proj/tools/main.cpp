// perturb-forest: corpus perturbation, sampling-and-voting, and robustness
// metrics for math question sets, as one CLI with file-based stages.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pforest/agents.hpp"
#include "pforest/corpus.hpp"
#include "pforest/errors.hpp"
#include "pforest/extraction.hpp"
#include "pforest/forest.hpp"
#include "pforest/jsonl.hpp"
#include "pforest/metrics.hpp"
#include "pforest/noise.hpp"
#include "pforest/report.hpp"

namespace {

using namespace pforest;

std::string iso_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Dataset parse_dataset_or_throw(const std::string& name) {
  auto d = parse_dataset(name);
  if (!d) throw ValidationError("unknown dataset \"" + name + "\"");
  return *d;
}

// ---- perturb ----------------------------------------------------------------

struct PerturbArgs {
  std::string corpus;
  std::string dataset = "gsm8k";
  std::string kind;
  double intensity = 0.3;
  uint64_t seed = 0;
  double rate = 1.0;
  int budget = 3;
  std::string dict;
  std::string source;
  std::string out;
};

int run_perturb(const PerturbArgs& a) {
  const Corpus corpus = load_corpus(a.corpus, parse_dataset_or_throw(a.dataset));
  const auto kind = parse_noise_kind(a.kind);
  if (!kind || *kind == NoiseKind::Clean)
    throw ValidationError("--kind must be punct, wikitypo, ata, or preloaded");

  std::vector<PerturbedQuestion> items;
  items.reserve(corpus.size());
  switch (*kind) {
    case NoiseKind::Punct: {
      uint64_t seed = a.seed;
      for (const Question& q : corpus.questions())
        items.push_back(perturb_punct(q, a.intensity, seed++));
      break;
    }
    case NoiseKind::WikiTypo: {
      if (a.dict.empty()) throw ValidationError("--kind wikitypo requires --dict");
      const TypoDictionary dict = TypoDictionary::load(a.dict);
      uint64_t seed = a.seed;
      for (const Question& q : corpus.questions())
        items.push_back(perturb_wikitypo(q, dict, seed++, a.rate));
      break;
    }
    case NoiseKind::Ata: {
      uint64_t seed = a.seed;
      for (const Question& q : corpus.questions()) {
        PerturbedQuestion p = perturb_ata(q, a.budget, seed++);
        if (static_cast<int>(p.edits.size()) < a.budget)
          std::cerr << "warning: " << q.id << ": only " << p.edits.size() << " of "
                    << a.budget << " words were perturbable\n";
        items.push_back(std::move(p));
      }
      break;
    }
    case NoiseKind::Preloaded: {
      if (a.source.empty()) throw ValidationError("--kind preloaded requires --source");
      items = load_preperturbed(a.source, corpus);
      break;
    }
    case NoiseKind::Clean:
      break;  // rejected above
  }
  write_perturbed(a.out, items);
  std::cerr << "wrote " << items.size() << " perturbed questions to " << a.out << "\n";
  return 0;
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
  std::string corpus;
  std::string perturbed;
  std::string dataset = "gsm8k";
  std::string backend;
  std::string endpoint = "http://127.0.0.1:8000";
  std::string store;
  std::string model;
  int n = 25;
  std::string params_file;
  double temperature = 0.7;
  double top_p = 0.95;
  int max_tokens = 2048;
  uint64_t seed_base = 0;
  int retry_limit = 3;
  int concurrency = 4;
  int timeout = 120;
  std::string out;
  std::string manifest;
};

DecodeParams load_decode_params(const SampleArgs& a) {
  DecodeParams p{a.temperature, a.top_p, a.max_tokens, a.seed_base};
  if (a.params_file.empty()) return p;
  const json obj = json::parse(read_file(a.params_file), nullptr, false);
  if (obj.is_discarded() || !obj.is_object())
    throw ValidationError(a.params_file + ": not a JSON object");
  p.temperature = obj.value("temperature", p.temperature);
  p.top_p = obj.value("top_p", p.top_p);
  p.max_tokens = obj.value("max_tokens", p.max_tokens);
  p.seed_base = obj.value("seed_base", p.seed_base);
  return p;
}

int run_sample(const SampleArgs& a) {
  if (a.corpus.empty() == a.perturbed.empty())
    throw ValidationError("pass exactly one of --corpus or --perturbed");
  if (a.n < 1) throw ValidationError("--n must be at least 1");
  const Dataset dataset = parse_dataset_or_throw(a.dataset);
  const DecodeParams params = load_decode_params(a);

  // (question id, condition, prompt) triplets in corpus order
  std::vector<SampleJob> jobs;
  if (!a.corpus.empty()) {
    const Corpus corpus = load_corpus(a.corpus, dataset);
    for (const Question& q : corpus.questions()) {
      SampleJob job;
      job.question_id = q.id;
      job.condition = "clean";
      job.prompt = build_prompt(q.text, dataset);
      jobs.push_back(std::move(job));
    }
  } else {
    for (const PerturbedQuestion& p : read_perturbed(a.perturbed)) {
      SampleJob job;
      job.question_id = p.base_id;
      job.condition = condition_label(p.spec);
      job.prompt = build_prompt(p.text, dataset);
      jobs.push_back(std::move(job));
    }
  }
  if (jobs.empty()) throw ValidationError("no questions to sample");
  for (SampleJob& job : jobs) {
    job.model = a.model;
    job.n_samples = a.n;
    job.params = params;
    job.retry_limit = a.retry_limit;
  }

  std::unique_ptr<Backend> backend;
  if (a.backend == "http") {
    backend = std::make_unique<HttpBackend>(a.endpoint, api_key_from_env(), a.timeout);
  } else if (a.backend == "replay") {
    if (a.store.empty()) throw ValidationError("--backend replay requires --store");
    backend = std::make_unique<ReplayBackend>(a.store);
  } else {
    throw ValidationError("--backend must be http or replay");
  }

  const std::string started = iso_now();
  const auto results = run_sampling(*backend, jobs, a.concurrency);

  std::vector<Sample> samples;
  std::vector<std::string> failed;
  size_t failed_calls = 0;
  for (size_t i = 0; i < results.size(); ++i) {
    if (results[i].all_failed) failed.push_back(jobs[i].question_id);
    failed_calls += static_cast<size_t>(results[i].failed_calls);
    samples.insert(samples.end(), results[i].samples.begin(), results[i].samples.end());
  }
  write_samples(a.out, samples);

  if (!a.manifest.empty()) {
    RunManifest m;
    m.config = json{{"subcommand", "sample"},
                    {"input", a.corpus.empty() ? a.perturbed : a.corpus},
                    {"dataset", a.dataset},
                    {"backend", a.backend},
                    {"endpoint", a.backend == "http" ? a.endpoint : a.store},
                    {"model", a.model},
                    {"n_samples", a.n},
                    {"temperature", params.temperature},
                    {"top_p", params.top_p},
                    {"max_tokens", params.max_tokens},
                    {"seed_base", params.seed_base},
                    {"retry_limit", a.retry_limit}};
    m.run_id = make_run_id(m.config);
    m.started = started;
    m.finished = iso_now();
    m.failed_questions = failed;
    m.artifacts.push_back(fingerprint_file(a.out));
    write_manifest(a.manifest, m);
  }

  if (!failed.empty())
    std::cerr << "warning: " << failed.size() << " of " << jobs.size()
              << " questions had every call fail\n";
  if (failed.size() == jobs.size())
    throw BackendError("every request failed; check the backend");
  std::cerr << "wrote " << samples.size() << " samples to " << a.out;
  if (failed_calls > 0) std::cerr << " (" << failed_calls << " failed calls)";
  std::cerr << "\n";
  return 0;
}

// ---- extract ----------------------------------------------------------------

struct ExtractArgs {
  std::string samples;
  std::string kind;
  std::string dataset;
  std::string out;
};

int run_extract(const ExtractArgs& a) {
  AnswerKind kind = AnswerKind::Numeric;
  if (!a.dataset.empty()) kind = answer_kind_for(parse_dataset_or_throw(a.dataset));
  if (!a.kind.empty()) {
    if (a.kind == "numeric") kind = AnswerKind::Numeric;
    else if (a.kind == "choice") kind = AnswerKind::Choice;
    else throw ValidationError("--kind must be numeric or choice");
  }
  std::vector<Sample> samples = read_samples(a.samples);
  if (samples.empty()) throw ValidationError(a.samples + ": no samples");
  size_t parseable = 0;
  for (Sample& s : samples) {
    s.canonical = extract_and_canonicalize(s.raw_text, kind);
    if (s.canonical->parseable()) ++parseable;
  }
  write_samples(a.out, samples);
  std::cerr << "extracted " << parseable << "/" << samples.size()
            << " parseable answers to " << a.out << "\n";
  return 0;
}

// ---- vote -------------------------------------------------------------------

struct VoteArgs {
  std::vector<std::string> samples;
  std::string corpus;
  std::string dataset = "gsm8k";
  std::vector<int> n_list = {1, 2, 5, 10, 15, 20, 25};
  std::string out;
};

int run_vote(const VoteArgs& a) {
  const Corpus corpus = load_corpus(a.corpus, parse_dataset_or_throw(a.dataset));
  std::vector<Sample> pooled;
  for (const std::string& path : a.samples) {
    auto part = read_samples(path);
    pooled.insert(pooled.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
  }
  const auto predictions = vote_corpus(corpus, pooled, a.n_list);
  write_predictions(a.out, predictions);
  std::cerr << "wrote " << predictions.size() << " group predictions to " << a.out << "\n";
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::string clean;
  std::vector<std::string> noisy;
  std::string model = "model";
  std::string dataset = "all";
  std::string asr_formula = "restricted";
  std::string out;
};

int run_evaluate(const EvaluateArgs& a) {
  AsrFormula formula;
  if (a.asr_formula == "restricted") formula = AsrFormula::Restricted;
  else if (a.asr_formula == "literal") formula = AsrFormula::Literal;
  else throw ValidationError("--asr-formula must be restricted or literal");

  // Prediction files may mix conditions; split by the condition column.
  std::vector<Prediction> clean;
  std::map<std::string, std::vector<Prediction>> noisy;
  auto absorb = [&](const std::string& path) {
    for (Prediction& p : read_predictions(path)) {
      if (p.condition == "clean") clean.push_back(std::move(p));
      else noisy[p.condition].push_back(std::move(p));
    }
  };
  absorb(a.clean);
  for (const std::string& path : a.noisy) absorb(path);
  if (clean.empty())
    throw ValidationError("no clean-condition predictions among the inputs");

  const auto rows = compute_metric_rows(a.model, a.dataset, clean, noisy, formula);
  write_metrics_csv(a.out, rows);
  std::cerr << "wrote " << rows.size() << " metric rows to " << a.out << "\n";
  return 0;
}

// ---- report -----------------------------------------------------------------

struct ReportArgs {
  std::string metrics;
  bool table = false;
  bool curves = false;
  std::string axis = "accuracy";
  std::string out;
};

int run_report(const ReportArgs& a) {
  const auto rows = read_metrics_csv(a.metrics);
  if (a.table == a.curves) throw ValidationError("pass exactly one of --table or --curves");
  if (a.table) emit_model_table(rows, a.out);
  else emit_curve_data(rows, a.axis, a.out);
  std::cerr << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"perturbation robustness harness for math question corpora"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file mirroring the flags; flags override it");

  PerturbArgs pa;
  CLI::App* perturb = app.add_subcommand("perturb", "write perturbed variants of a corpus");
  perturb->add_option("--corpus", pa.corpus, "input corpus JSONL")->required();
  perturb->add_option("--dataset", pa.dataset, "gsm8k|math|mmlu_math|multiarith");
  perturb->add_option("--kind", pa.kind, "punct|wikitypo|ata|preloaded")->required();
  perturb->add_option("--intensity", pa.intensity, "punctuation marks per word (0,1]");
  perturb->add_option("--seed", pa.seed, "base seed; question i uses seed+i");
  perturb->add_option("--rate", pa.rate, "typo replacement probability (0,1]");
  perturb->add_option("--budget", pa.budget, "words to corrupt per question");
  perturb->add_option("--dict", pa.dict, "typo dictionary JSONL");
  perturb->add_option("--source", pa.source, "pre-generated perturbed JSONL");
  perturb->add_option("--out", pa.out, "output perturbed JSONL")->required();

  SampleArgs sa;
  CLI::App* sample = app.add_subcommand("sample", "draw completions for every question");
  sample->add_option("--corpus", sa.corpus, "clean corpus JSONL");
  sample->add_option("--perturbed", sa.perturbed, "perturbed questions JSONL");
  sample->add_option("--dataset", sa.dataset, "gsm8k|math|mmlu_math|multiarith");
  sample->add_option("--backend", sa.backend, "http|replay")->required();
  sample->add_option("--endpoint", sa.endpoint, "chat-completion base URL");
  sample->add_option("--store", sa.store, "replay store file or directory");
  sample->add_option("--model", sa.model, "model name sent with each request")->required();
  sample->add_option("--n", sa.n, "samples per question");
  sample->add_option("--params", sa.params_file, "JSON file with decode parameters");
  sample->add_option("--temperature", sa.temperature, "sampling temperature");
  sample->add_option("--top-p", sa.top_p, "nucleus sampling mass");
  sample->add_option("--max-tokens", sa.max_tokens, "completion token cap");
  sample->add_option("--seed-base", sa.seed_base, "agent i uses seed-base+i");
  sample->add_option("--retry-limit", sa.retry_limit, "extra attempts after transient failures");
  sample->add_option("--concurrency", sa.concurrency, "parallel questions");
  sample->add_option("--timeout", sa.timeout, "per-request timeout, seconds");
  sample->add_option("--out", sa.out, "output samples JSONL")->required();
  sample->add_option("--manifest", sa.manifest, "write a run manifest here");

  ExtractArgs ea;
  CLI::App* extract = app.add_subcommand("extract", "normalize final answers in samples");
  extract->add_option("--samples", ea.samples, "samples JSONL")->required();
  extract->add_option("--kind", ea.kind, "numeric|choice");
  extract->add_option("--dataset", ea.dataset, "derive the answer kind from a dataset");
  extract->add_option("--out", ea.out, "output samples JSONL with canonical answers")
      ->required();

  VoteArgs va;
  CLI::App* vote = app.add_subcommand("vote", "majority-vote committees against gold answers");
  vote->add_option("--samples", va.samples, "extracted samples JSONL (repeatable)")
      ->required();
  vote->add_option("--corpus", va.corpus, "corpus JSONL with gold answers")->required();
  vote->add_option("--dataset", va.dataset, "gsm8k|math|mmlu_math|multiarith");
  vote->add_option("--n-list", va.n_list, "committee sizes")->delimiter(',');
  vote->add_option("--out", va.out, "output predictions JSONL")->required();

  EvaluateArgs ev;
  CLI::App* evaluate = app.add_subcommand("evaluate", "accuracy and attack-rate table");
  evaluate->add_option("--clean", ev.clean, "predictions JSONL holding the clean rows")
      ->required();
  evaluate->add_option("--noisy", ev.noisy, "further predictions JSONL (repeatable)");
  evaluate->add_option("--model", ev.model, "model label for the rows");
  evaluate->add_option("--dataset", ev.dataset, "dataset label for the rows");
  evaluate->add_option("--asr-formula", ev.asr_formula, "restricted|literal");
  evaluate->add_option("--out", ev.out, "output metrics CSV")->required();

  ReportArgs ra;
  CLI::App* report = app.add_subcommand("report", "tables and curve data from metrics");
  report->add_option("--metrics", ra.metrics, "metrics CSV")->required();
  report->add_flag("--table", ra.table, "condition-by-n accuracy table");
  report->add_flag("--curves", ra.curves, "long-form curve points");
  report->add_option("--axis", ra.axis, "accuracy|asr (curves)");
  report->add_option("--out", ra.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (perturb->parsed()) return run_perturb(pa);
    if (sample->parsed()) return run_sample(sa);
    if (extract->parsed()) return run_extract(ea);
    if (vote->parsed()) return run_vote(va);
    if (evaluate->parsed()) return run_evaluate(ev);
    if (report->parsed()) return run_report(ra);
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
