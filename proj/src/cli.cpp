#include "bidhi/cli.hpp"

#include "bidhi/config.hpp"
#include "bidhi/dataset.hpp"
#include "bidhi/error.hpp"
#include "bidhi/pipeline.hpp"
#include "bidhi/report.hpp"
#include "bidhi/util.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <iostream>

namespace bidhi {

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) {
    g_interrupted.store(true);
}

std::string approach_names() {
    std::string out;
    for (auto a : kAllApproaches) {
        if (!out.empty()) out += ", ";
        out += to_string(a);
    }
    return out;
}

struct RunFlags {
    std::string config;
    std::string corpus;
    std::vector<std::string> backends;
    std::string approaches;
    std::optional<int> parallelism;
    std::string run_dir;
    std::string suite_id;
    std::optional<int> max_repairs;
    std::optional<double> timeout;
    std::string infra_mode;
    std::string templates;
    bool no_score = false;
    bool verbose = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config, "Suite config file (JSON)");
    cmd->add_option("--corpus", f.corpus, "Task corpus (JSON lines)");
    cmd->add_option("--backend", f.backends, "[id=]endpoint; replaces the configured backends (repeatable)");
    cmd->add_option("--approaches", f.approaches, "Comma-separated approaches: " + approach_names());
    cmd->add_option("--parallelism", f.parallelism, "Concurrent task runs");
    cmd->add_option("--run-dir", f.run_dir, "Root directory for suite output");
    cmd->add_option("--suite-id", f.suite_id, "Suite directory name under the run dir");
    cmd->add_option("--max-repairs", f.max_repairs, "Repair limit for CI approaches");
    cmd->add_option("--timeout", f.timeout, "Per-execution timeout in seconds");
    cmd->add_option("--infra-mode", f.infra_mode, "incorrect | exclude");
    cmd->add_option("--templates", f.templates, "Prompt template directory");
    cmd->add_flag("--no-score", f.no_score, "Do not score against hidden tests");
    cmd->add_flag("-v,--verbose", f.verbose, "Print one line per finished cell");
}

SuiteConfig resolve_config(const RunFlags& f) {
    SuiteConfig c;
    if (!f.config.empty()) c = load_suite_config(f.config);
    if (!f.corpus.empty()) c.corpus = f.corpus;
    if (!f.backends.empty()) {
        c.backends.clear();
        for (const auto& spec : f.backends) c.backends.push_back(parse_backend_flag(spec));
    }
    if (!f.approaches.empty()) c.approaches = parse_approach_list(f.approaches);
    if (f.parallelism) c.parallelism = *f.parallelism;
    if (!f.run_dir.empty()) c.run_dir = f.run_dir;
    if (!f.suite_id.empty()) c.suite_id = f.suite_id;
    if (f.max_repairs) c.max_repairs = *f.max_repairs;
    if (f.timeout) c.exec_timeout = *f.timeout;
    if (!f.infra_mode.empty()) c.infra_mode = infra_mode_from_string(f.infra_mode);
    if (!f.templates.empty()) c.templates_dir = f.templates;
    if (f.no_score) c.score = false;
    c.validate();
    if (!std::filesystem::exists(c.corpus)) throw ConfigError("corpus", "file not found: " + c.corpus.string());
    return c;
}

PipelineConfig pipeline_config(const SuiteConfig& c) {
    PipelineConfig p;
    if (!c.templates_dir.empty()) p.prompts = load_prompt_set(c.templates_dir);
    p.max_repairs = c.max_repairs;
    p.exec_timeout = c.exec_timeout;
    p.testgen_limit = c.testgen_limit;
    return p;
}

Translators make_translators(const SuiteConfig& c) {
    Translators t;
    std::optional<std::filesystem::path> cache;
    if (!c.translation_cache.empty()) cache = c.translation_cache;
    if (c.translator_a) t.a = make_translator(*c.translator_a, cache);
    if (c.translator_b) t.b = make_translator(*c.translator_b, cache);
    return t;
}

SandboxConfig sandbox_config(const SuiteConfig& c) {
    SandboxConfig s;
    s.python = c.python;
    s.max_processes = c.max_processes;
    s.memory_limit_mb = c.memory_limit_mb;
    return s;
}

int execute_suite(const SuiteConfig& c, std::vector<std::shared_ptr<ChatBackend>> backends, bool verbose,
                  std::ostream& out, std::ostream& err) {
    const auto corpus = load_corpus(c.corpus);
    Sandbox sandbox(sandbox_config(c));
    if (!sandbox.available()) {
        err << "error: python interpreter '" << c.python << "' not found\n";
        return kExitInfra;
    }

    SuiteOptions options;
    options.run_dir = c.run_dir;
    options.suite_id = c.suite_id;
    options.parallelism = c.parallelism;
    options.score = c.score;
    options.infra_mode = c.infra_mode;
    options.keep_artifacts = c.keep_artifacts;
    options.cancel = &g_interrupted;
    const std::size_t total = corpus.size() * c.approaches.size() * backends.size();
    std::size_t done = 0;
    options.on_cell = [&](const RunRecord& r, bool resumed) {
        ++done;
        if (!verbose) return;
        err << "[" << done << "/" << total << "] " << r.task_id << " " << to_string(r.approach) << " "
            << r.backend_id << " " << (r.verdict ? std::string(to_string(*r.verdict)) : std::string("unscored"))
            << (resumed ? " (resumed)" : "") << "\n";
    };

    g_interrupted.store(false);
    auto previous = std::signal(SIGINT, on_sigint);
    SuiteResult result;
    try {
        result = run_suite(corpus, c.approaches, backends, sandbox, make_translators(c), pipeline_config(c), options);
    } catch (...) {
        std::signal(SIGINT, previous);
        throw;
    }
    std::signal(SIGINT, previous);

    out << "suite: " << result.suite_dir.string() << "\n"
        << "cells: " << result.records.size() << " (executed " << result.executed << ", resumed " << result.resumed
        << ")\n"
        << "infra: " << result.infra << "\n"
        << "unscorable: " << result.unscorable << "\n";
    if (result.unscorable > 0)
        err << "warning: " << result.unscorable << " records have no hidden tests and are excluded from accuracy\n";
    out << format_matrix_csv(result.matrix);
    if (result.cancelled) {
        err << "interrupted: partial results saved; rerun the same command to resume\n";
        return kExitInterrupted;
    }
    return kExitOk;
}

int cmd_run(const RunFlags& f, std::ostream& out, std::ostream& err) {
    const auto c = resolve_config(f);
    std::vector<std::shared_ptr<ChatBackend>> backends;
    for (const auto& b : c.backends) backends.push_back(make_backend(b));
    return execute_suite(c, std::move(backends), f.verbose, out, err);
}

int cmd_replay(const RunFlags& f, const std::string& from, std::ostream& out, std::ostream& err) {
    auto c = resolve_config(f);
    if (!std::filesystem::is_directory(from)) throw ConfigError("--from", "not a suite directory: " + from);
    const SuiteLayout source{from};
    std::vector<std::shared_ptr<ChatBackend>> backends;
    for (auto b : c.backends) {
        const auto transcript = source.transcript(b.backend_id);
        if (!std::filesystem::exists(transcript))
            throw ConfigError("--from", "no transcript for backend '" + b.backend_id + "' in " + from);
        b.endpoint = "replay:" + transcript.string();
        backends.push_back(make_backend(b));
    }
    if (c.suite_id.empty()) c.suite_id = std::filesystem::path(from).filename().string() + "-replay";
    if (std::filesystem::weakly_canonical(c.run_dir / c.suite_id) == std::filesystem::weakly_canonical(from))
        throw ConfigError("--suite-id", "replay output must differ from the source suite");
    return execute_suite(c, std::move(backends), f.verbose, out, err);
}

int cmd_score(const std::string& suite_dir, const std::string& corpus_path, const std::string& infra,
              const std::string& python, double timeout, std::ostream& out, std::ostream& err) {
    if (!std::filesystem::is_directory(suite_dir)) throw ConfigError("suite_dir", "not a directory: " + suite_dir);
    if (!std::filesystem::exists(corpus_path)) throw ConfigError("--corpus", "file not found: " + corpus_path);
    const auto corpus = load_corpus(corpus_path);
    const auto mode = infra.empty() ? InfraMode::CountAsIncorrect : infra_mode_from_string(infra);
    auto loaded = load_suite(suite_dir);
    if (loaded.records.empty()) {
        err << "no records in " << suite_dir << "\n";
        return kExitNoRecords;
    }
    const auto digest = corpus_digest(corpus);
    if (loaded.corpus_digest && *loaded.corpus_digest != digest)
        err << "warning: corpus digest differs from the one recorded in suite.meta\n";

    std::map<std::string, const TaskRecord*> by_id;
    for (const auto& t : corpus) by_id[t.task_id] = &t;
    SandboxConfig sc;
    sc.python = python;
    Sandbox sandbox(sc);
    if (!sandbox.available()) {
        err << "error: python interpreter '" << python << "' not found\n";
        return kExitInfra;
    }
    const SuiteLayout layout{suite_dir};
    int missing = 0;
    for (auto& r : loaded.records) {
        auto it = by_id.find(r.task_id);
        if (it == by_id.end()) {
            ++missing;
            continue;
        }
        if (r.verdict != Verdict::Infra) r.verdict.reset();
        score_run(r, *it->second, sandbox, timeout);
        write_file_atomic(layout.record(r.backend_id, r.approach, r.task_id), serialize_record(r) + "\n");
    }
    if (missing > 0) err << "warning: " << missing << " records reference tasks missing from the corpus\n";
    const auto matrix = aggregate(loaded.records, loaded.backend_order, loaded.approach_order, mode);
    write_file_atomic(layout.matrix(), format_matrix_csv(matrix));
    out << format_matrix_csv(matrix);
    return kExitOk;
}

int cmd_report(const std::string& input, const std::string& out_dir, const std::string& infra, std::ostream& out,
               std::ostream& err) {
    if (!std::filesystem::exists(input)) throw ConfigError("input", "not found: " + input);
    ResultsMatrix matrix;
    if (std::filesystem::is_directory(input)) {
        const auto loaded = load_suite(input);
        if (loaded.records.empty()) {
            err << "no records in " << input << "\n";
            return kExitNoRecords;
        }
        const auto mode = infra.empty() ? InfraMode::CountAsIncorrect : infra_mode_from_string(infra);
        matrix = aggregate(loaded.records, loaded.backend_order, loaded.approach_order, mode);
    } else {
        matrix = load_matrix_csv(input);
    }
    if (matrix.size() == 0) {
        err << "no records with scored results in " << input << "\n";
        return kExitNoRecords;
    }
    for (const auto& p : write_report(matrix, out_dir)) out << p.string() << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
    if (!std::filesystem::exists(path)) {
        err << "error: corpus not found: " << path << "\n";
        return kExitUsage;
    }
    const auto report = validate_corpus(path);
    for (const auto& d : report.diagnostics) {
        err << path << ":" << d.line_no << ": "
            << (d.severity == CorpusDiagnostic::Severity::Error ? "error" : "warning") << ": " << d.message << "\n";
    }
    out << report.records.size() << " valid records";
    if (report.clean()) out << ", digest " << corpus_digest(report.records);
    out << "\n";
    return report.clean() ? kExitOk : kExitInvalid;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"bidhi: code-generation experiment harness", "bidhi"};
    app.footer("Approaches: " + approach_names() +
               "\nExit codes: 0 ok, 1 invalid corpus, 2 usage/config error, 3 no records, 4 infrastructure "
               "failure, 130 interrupted");
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "Run approaches over a corpus and backends");
    add_run_flags(run, run_flags);

    RunFlags replay_flags;
    std::string replay_from;
    auto* replay = app.add_subcommand("replay", "Re-run a suite from its recorded transcripts");
    add_run_flags(replay, replay_flags);
    replay->add_option("--from", replay_from, "Recorded suite directory")->required();

    std::string score_dir, score_corpus, score_infra, score_python = "python3";
    double score_timeout = 10.0;
    auto* score = app.add_subcommand("score", "Score existing records against hidden tests");
    score->add_option("suite_dir", score_dir, "Suite directory")->required();
    score->add_option("--corpus", score_corpus, "Corpus with hidden tests")->required();
    score->add_option("--infra-mode", score_infra, "incorrect | exclude");
    score->add_option("--python", score_python, "Python interpreter");
    score->add_option("--timeout", score_timeout, "Per-execution timeout in seconds");

    std::string report_input, report_out = "report", report_infra;
    auto* report = app.add_subcommand("report", "Write tables, improvement report and heatmaps");
    report->add_option("input", report_input, "Suite directory or matrix CSV")->required();
    report->add_option("--out", report_out, "Output directory");
    report->add_option("--infra-mode", report_infra, "incorrect | exclude");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "Lint a corpus file");
    validate->add_option("corpus", validate_path, "Corpus (JSON lines)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*run) return cmd_run(run_flags, out, err);
        if (*replay) return cmd_replay(replay_flags, replay_from, out, err);
        if (*score) return cmd_score(score_dir, score_corpus, score_infra, score_python, score_timeout, out, err);
        if (*report) return cmd_report(report_input, report_out, report_infra, out, err);
        if (*validate) return cmd_validate(validate_path, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const MalformedRecord& e) {
        err << "error: corpus " << e.what() << "\n";
        return kExitUsage;
    } catch (const DuplicateTaskId& e) {
        err << "error: corpus " << e.what() << "\n";
        return kExitUsage;
    } catch (const InvalidTemplate& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInfra;
    }
    return kExitUsage;
}

} // namespace bidhi
