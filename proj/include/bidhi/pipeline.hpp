#pragma once

#include "bidhi/backends.hpp"
#include "bidhi/dataset.hpp"
#include "bidhi/metrics.hpp"
#include "bidhi/prompting.hpp"
#include "bidhi/records.hpp"
#include "bidhi/repair.hpp"
#include "bidhi/sandbox.hpp"
#include "bidhi/translate.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bidhi {

struct Translators {
    /// Used by TRANSLATE_A and TRANSLATE_B respectively.
    std::shared_ptr<Translator> a;
    std::shared_ptr<Translator> b;
};

struct PipelineConfig {
    PromptSet prompts = default_prompt_set();
    int max_repairs = 5;
    double exec_timeout = 10.0;
    int testgen_limit = kDefaultTestLimit;
};

/// Runs one approach for one task. Only the task's public view is used to
/// build prompts. Infra-class failures are recorded (verdict Infra plus a
/// flag), never thrown.
RunRecord run_task(const TaskRecord& task, Approach approach, ChatBackend& backend, Sandbox& sandbox,
                   const Translators& translators, const PipelineConfig& config);

/// Hidden-test strings that occur in any prompt of the record, ignoring
/// ones that were legitimately injected (the given test or a generated
/// test that happens to coincide).
std::vector<std::string> leaked_hidden_tests(const RunRecord& record, const TaskRecord& task);

/// Executes the final code against the hidden tests in a fresh sandbox
/// call and sets record.verdict. With no hidden tests the record is
/// flagged Unscorable and left without a verdict. Returns the verdict.
std::optional<Verdict> score_run(RunRecord& record, const TaskRecord& task, Sandbox& sandbox, double timeout);

struct SuiteOptions {
    std::filesystem::path run_dir = "runs";
    /// Empty picks "suite-" plus the first 12 digest characters.
    std::string suite_id;
    int parallelism = 1;
    bool score = true;
    InfraMode infra_mode = InfraMode::CountAsIncorrect;
    bool keep_artifacts = true;
    bool record_transcripts = true;
    /// Re-run cells whose stored verdict is Infra instead of skipping them.
    bool retry_infra = true;
    /// Polled between cells; setting it drains the pool.
    const std::atomic<bool>* cancel = nullptr;
    std::function<void(const RunRecord&, bool resumed)> on_cell;
};

struct SuiteResult {
    std::filesystem::path suite_dir;
    /// Task-major, then declared approach order, then declared backend order.
    std::vector<RunRecord> records;
    ResultsMatrix matrix;
    int executed = 0;
    int resumed = 0;
    int infra = 0;
    int unscorable = 0;
    bool cancelled = false;
};

/// Layout helpers for `<run_dir>/<suite_id>/<backend>/<approach>/<task>.record`.
struct SuiteLayout {
    std::filesystem::path suite_dir;

    std::filesystem::path meta() const { return suite_dir / "suite.meta"; }
    std::filesystem::path matrix() const { return suite_dir / "matrix.csv"; }
    std::filesystem::path backend_dir(const std::string& backend) const;
    std::filesystem::path transcript(const std::string& backend) const;
    std::filesystem::path record(const std::string& backend, Approach a, const std::string& task_id) const;
    std::filesystem::path attempt_dir(const std::string& backend, Approach a, const std::string& task_id,
                                      int attempt) const;
};

std::string default_suite_id(const std::string& corpus_digest);

/// Every (task, approach, backend) cell exactly once, `parallelism`
/// workers, records streamed to disk as they finish. A cell whose record
/// already exists for the same corpus digest is loaded instead of re-run.
SuiteResult run_suite(std::span<const TaskRecord> corpus, std::span<const Approach> approaches,
                      std::span<const std::shared_ptr<ChatBackend>> backends, Sandbox& sandbox,
                      const Translators& translators, const PipelineConfig& config, const SuiteOptions& options);

/// Every readable record under a suite directory, ordered by suite.meta's
/// declared axes when present.
struct LoadedSuite {
    std::vector<RunRecord> records;
    std::vector<std::string> backend_order;
    std::vector<Approach> approach_order;
    std::optional<std::string> corpus_digest;
};

LoadedSuite load_suite(const std::filesystem::path& suite_dir);

} // namespace bidhi
