#include "bidhi/pipeline.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace bidhi {

namespace {

bool uses_tests_template(Approach a) {
    switch (a) {
    case Approach::TddGenerated:
    case Approach::TddGiven:
    case Approach::TddCombined:
    case Approach::CiGivenTest: return true;
    default: return false;
    }
}

std::shared_ptr<Translator> translator_for(Approach a, const Translators& t) {
    if (a == Approach::TranslateA) return t.a;
    if (a == Approach::TranslateB) return t.b;
    return nullptr;
}

void mark_infra(RunRecord& rec, RunFlag flag, const std::string& why) {
    rec.flags.insert(flag);
    rec.verdict = Verdict::Infra;
    if (!rec.error.empty()) rec.error += "; ";
    rec.error += why;
}

void write_artifacts(const SuiteLayout& layout, const RunRecord& rec) {
    for (const auto& a : rec.attempts) {
        const auto dir = layout.attempt_dir(rec.backend_id, rec.approach, rec.task_id, a.attempt_index);
        std::filesystem::create_directories(dir);
        write_file_atomic(dir / "candidate.py", a.code.code);
        write_file_atomic(dir / "stdout.txt", a.exec.stdout_text);
        write_file_atomic(dir / "stderr.txt", a.exec.stderr_text);
    }
}

nlohmann::json suite_meta(const std::string& suite_id, const std::string& digest, std::span<const Approach> approaches,
                          std::span<const std::shared_ptr<ChatBackend>> backends, const PipelineConfig& config,
                          const SuiteOptions& options) {
    nlohmann::json meta;
    meta["suite_id"] = suite_id;
    meta["corpus_digest"] = digest;
    meta["approaches"] = nlohmann::json::array();
    for (auto a : approaches) meta["approaches"].push_back(to_string(a));
    meta["backends"] = nlohmann::json::array();
    for (const auto& b : backends) {
        const auto& c = b->config();
        meta["backends"].push_back({{"backend_id", c.backend_id},
                                    {"endpoint", c.endpoint},
                                    {"model_name", c.model_name},
                                    {"temperature", c.sampling.temperature},
                                    {"max_tokens", c.sampling.max_tokens}});
    }
    meta["max_repairs"] = config.max_repairs;
    meta["exec_timeout"] = config.exec_timeout;
    meta["testgen_limit"] = config.testgen_limit;
    meta["infra_mode"] = to_string(options.infra_mode);
    return meta;
}

std::optional<RunRecord> load_resumable(const std::filesystem::path& path, const TaskRecord& task, Approach a,
                                        const std::string& backend_id, const std::string& digest,
                                        bool retry_infra) {
    if (!std::filesystem::exists(path)) return std::nullopt;
    try {
        auto rec = parse_record(read_file(path));
        if (rec.task_id != task.task_id || rec.approach != a || rec.backend_id != backend_id ||
            rec.corpus_digest != digest)
            return std::nullopt;
        if (retry_infra && rec.verdict == Verdict::Infra) return std::nullopt;
        return rec;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace

RunRecord run_task(const TaskRecord& task, Approach approach, ChatBackend& backend, Sandbox& sandbox,
                   const Translators& translators, const PipelineConfig& config) {
    const TaskRecord pub = task.public_view();
    const std::string approach_name(to_string(approach));

    RunRecord rec;
    rec.task_id = pub.task_id;
    rec.approach = approach;
    rec.backend_id = backend.config().backend_id;
    rec.instruction_original = pub.instruction;
    rec.instruction_used = pub.instruction;

    try {
        if (approach == Approach::TranslateA || approach == Approach::TranslateB) {
            auto translator = translator_for(approach, translators);
            if (!translator) {
                mark_infra(rec, RunFlag::TranslationFailure, "no translator configured for " + approach_name);
                return rec;
            }
            try {
                rec.instruction_used = translator->translate(pub.instruction);
            } catch (const TranslatorError& e) {
                mark_infra(rec, RunFlag::TranslationFailure, e.what());
                return rec;
            }
        }

        std::vector<TestCase> generated;
        if (approach == Approach::TddGenerated || approach == Approach::TddCombined) {
            // One spare slot for COMBINED, since a generated copy of the given test is dropped later.
            const int limit = config.testgen_limit + (approach == Approach::TddCombined ? 1 : 0);
            try {
                generated = generate_tests(pub, backend, config.prompts, sandbox,
                                           CallKey{pub.task_id, approach_name, Stage::TestGeneration, 0}, limit);
            } catch (const BackendError& e) {
                rec.flags.insert(RunFlag::TestgenDegraded);
                rec.error = std::string("test generation failed: ") + e.what();
            }
        }
        switch (approach) {
        case Approach::TddGenerated:
            rec.injected_tests = assemble_tests(TddVariant::Generated, pub, generated, config.testgen_limit);
            break;
        case Approach::TddCombined:
            rec.injected_tests = assemble_tests(TddVariant::Combined, pub, generated, config.testgen_limit);
            break;
        case Approach::TddGiven:
        case Approach::CiGivenTest:
            rec.injected_tests = assemble_tests(TddVariant::Given, pub, {}, config.testgen_limit);
            break;
        default: break;
        }

        const auto injected = assert_texts(rec.injected_tests);
        std::map<std::string, std::string> bindings{{"instruction", rec.instruction_used},
                                                    {"entry_point", pub.entry_point},
                                                    {"tests", format_tests_block(injected)}};
        const auto& tmpl = uses_tests_template(approach) ? config.prompts.generate_with_tests
                                                         : config.prompts.generate;

        RepairRequest request;
        request.task_id = pub.task_id;
        request.approach = approach_name;
        request.initial_prompt = render(tmpl, bindings, config.prompts.system_message);
        request.repair_template = &config.prompts.repair;
        request.bindings = bindings;

        RepairLoopConfig loop;
        loop.per_exec_timeout = config.exec_timeout;
        loop.max_repairs = 0;
        switch (approach) {
        case Approach::CiVanilla:
            loop.max_repairs = config.max_repairs;
            loop.repair_on = RepairOn::CompileOnly;
            break;
        case Approach::CiGivenTest:
            loop.max_repairs = config.max_repairs;
            loop.repair_on = RepairOn::AnyFailure;
            request.tests_for_loop = {std::string(trim(pub.given_test))};
            break;
        case Approach::TddGenerated:
        case Approach::TddGiven:
        case Approach::TddCombined: request.tests_for_loop = injected; break;
        default: break;
        }

        auto outcome = repair_loop(request, backend, sandbox, loop);
        rec.attempts = std::move(outcome.attempts);
        if (outcome.backend_error) mark_infra(rec, RunFlag::BackendFailure, *outcome.backend_error);
    } catch (const SandboxUnavailable& e) {
        mark_infra(rec, RunFlag::SandboxUnavailable, e.what());
    }

    for (const auto& a : rec.attempts)
        if (a.code.origin == ExtractedCode::Origin::WholeResponseFallback) rec.flags.insert(RunFlag::ExtractionFallback);
    if (!rec.attempts.empty()) {
        rec.final_code = rec.attempts.back().code.code;
        rec.final_exec = rec.attempts.back().exec;
    }
    return rec;
}

std::vector<std::string> leaked_hidden_tests(const RunRecord& record, const TaskRecord& task) {
    std::vector<std::string> leaked;
    const std::string given(trim(task.given_test));
    for (const auto& raw : task.hidden_tests) {
        const std::string hidden(trim(raw));
        if (hidden.empty() || hidden == given) continue;
        const bool injected = std::any_of(record.injected_tests.begin(), record.injected_tests.end(),
                                          [&](const TestCase& t) { return t.assert_text == hidden; });
        if (injected) continue;
        bool found = false;
        for (const auto& a : record.attempts) {
            for (const auto& m : a.prompt) {
                if (m.content.find(hidden) != std::string::npos) {
                    found = true;
                    break;
                }
            }
            if (found) break;
        }
        if (found) leaked.push_back(hidden);
    }
    return leaked;
}

std::optional<Verdict> score_run(RunRecord& record, const TaskRecord& task, Sandbox& sandbox, double timeout) {
    if (!leaked_hidden_tests(record, task).empty()) record.flags.insert(RunFlag::HiddenTestInPrompt);
    if (record.verdict == Verdict::Infra) return record.verdict;
    if (task.hidden_tests.empty()) {
        record.flags.insert(RunFlag::Unscorable);
        record.verdict.reset();
        return std::nullopt;
    }
    record.flags.erase(RunFlag::Unscorable);
    if (record.attempts.empty()) {
        record.verdict = Verdict::Infra;
        return record.verdict;
    }
    try {
        record.score_exec = sandbox.execute(record.final_code, task.hidden_tests, timeout);
        record.verdict = record.score_exec->status == ExecStatus::Success ? Verdict::Correct : Verdict::Incorrect;
    } catch (const SandboxUnavailable& e) {
        mark_infra(record, RunFlag::SandboxUnavailable, e.what());
    }
    return record.verdict;
}

std::filesystem::path SuiteLayout::backend_dir(const std::string& backend) const {
    return suite_dir / path_component(backend);
}

std::filesystem::path SuiteLayout::transcript(const std::string& backend) const {
    return backend_dir(backend) / "transcript.jsonl";
}

std::filesystem::path SuiteLayout::record(const std::string& backend, Approach a, const std::string& task_id) const {
    return backend_dir(backend) / std::string(to_string(a)) / (path_component(task_id) + ".record");
}

std::filesystem::path SuiteLayout::attempt_dir(const std::string& backend, Approach a, const std::string& task_id,
                                               int attempt) const {
    return backend_dir(backend) / std::string(to_string(a)) / (path_component(task_id) + ".attempts") /
           std::to_string(attempt);
}

std::string default_suite_id(const std::string& corpus_digest) {
    return "suite-" + corpus_digest.substr(0, 12);
}

SuiteResult run_suite(std::span<const TaskRecord> corpus, std::span<const Approach> approaches,
                      std::span<const std::shared_ptr<ChatBackend>> backends, Sandbox& sandbox,
                      const Translators& translators, const PipelineConfig& config, const SuiteOptions& options) {
    if (options.parallelism < 1) throw ConfigError("parallelism", "must be >= 1");
    const auto digest = corpus_digest(corpus);
    const auto suite_id = options.suite_id.empty() ? default_suite_id(digest) : options.suite_id;
    const SuiteLayout layout{options.run_dir / suite_id};
    std::filesystem::create_directories(layout.suite_dir);
    write_file_atomic(layout.meta(),
                      suite_meta(suite_id, digest, approaches, backends, config, options).dump(2) + "\n");

    std::vector<std::shared_ptr<ChatBackend>> active;
    for (const auto& b : backends) {
        std::filesystem::create_directories(layout.backend_dir(b->config().backend_id));
        if (options.record_transcripts) {
            auto writer = std::make_shared<TranscriptWriter>(layout.transcript(b->config().backend_id));
            active.push_back(std::make_shared<RecordingBackend>(b, std::move(writer)));
        } else {
            active.push_back(b);
        }
    }

    struct Cell {
        std::size_t task, approach, backend;
    };
    std::vector<Cell> cells;
    for (std::size_t t = 0; t < corpus.size(); ++t)
        for (std::size_t a = 0; a < approaches.size(); ++a)
            for (std::size_t b = 0; b < active.size(); ++b) cells.push_back({t, a, b});

    std::vector<std::optional<RunRecord>> results(cells.size());
    std::vector<char> was_resumed(cells.size(), 0);
    std::atomic<std::size_t> next{0};
    std::mutex callback_mu;

    auto worker = [&] {
        for (;;) {
            if (options.cancel && options.cancel->load()) return;
            const auto idx = next.fetch_add(1);
            if (idx >= cells.size()) return;
            const auto& cell = cells[idx];
            const auto& task = corpus[cell.task];
            const auto approach = approaches[cell.approach];
            auto& backend = *active[cell.backend];
            const auto& backend_id = backend.config().backend_id;
            const auto path = layout.record(backend_id, approach, task.task_id);

            RunRecord rec;
            bool resumed = false;
            if (auto existing = load_resumable(path, task, approach, backend_id, digest, options.retry_infra)) {
                rec = std::move(*existing);
                resumed = true;
                if (options.score && !rec.verdict && !task.hidden_tests.empty()) {
                    score_run(rec, task, sandbox, config.exec_timeout);
                    write_file_atomic(path, serialize_record(rec) + "\n");
                }
            } else {
                try {
                    rec = run_task(task, approach, backend, sandbox, translators, config);
                } catch (const std::exception& e) {
                    rec = RunRecord{};
                    rec.task_id = task.task_id;
                    rec.approach = approach;
                    rec.backend_id = backend_id;
                    rec.instruction_original = rec.instruction_used = task.instruction;
                    rec.verdict = Verdict::Infra;
                    rec.error = e.what();
                }
                rec.corpus_digest = digest;
                if (options.score) score_run(rec, task, sandbox, config.exec_timeout);
                std::filesystem::create_directories(path.parent_path());
                if (options.keep_artifacts) write_artifacts(layout, rec);
                write_file_atomic(path, serialize_record(rec) + "\n");
            }
            if (options.on_cell) {
                std::lock_guard lock(callback_mu);
                options.on_cell(rec, resumed);
            }
            was_resumed[idx] = resumed ? 1 : 0;
            results[idx] = std::move(rec);
        }
    };

    {
        std::vector<std::jthread> pool;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism),
                                             std::max<std::size_t>(cells.size(), 1));
        for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    }

    SuiteResult out;
    out.suite_dir = layout.suite_dir;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i]) {
            out.cancelled = true;
            continue;
        }
        if (was_resumed[i])
            ++out.resumed;
        else
            ++out.executed;
        if (results[i]->verdict == Verdict::Infra) ++out.infra;
        if (results[i]->has(RunFlag::Unscorable)) ++out.unscorable;
        out.records.push_back(std::move(*results[i]));
    }

    std::vector<std::string> backend_order;
    for (const auto& b : backends) backend_order.push_back(b->config().backend_id);
    out.matrix = aggregate(out.records, backend_order, approaches, options.infra_mode);
    write_file_atomic(layout.matrix(), format_matrix_csv(out.matrix));
    return out;
}

LoadedSuite load_suite(const std::filesystem::path& suite_dir) {
    LoadedSuite out;
    if (!std::filesystem::is_directory(suite_dir)) throw IoError("not a suite directory: " + suite_dir.string());
    const SuiteLayout layout{suite_dir};
    if (std::filesystem::exists(layout.meta())) {
        try {
            const auto meta = nlohmann::json::parse(read_file(layout.meta()));
            for (const auto& b : meta.at("backends")) out.backend_order.push_back(b.at("backend_id").get<std::string>());
            for (const auto& a : meta.at("approaches")) out.approach_order.push_back(approach_from_string(a.get<std::string>()));
            out.corpus_digest = meta.at("corpus_digest").get<std::string>();
        } catch (const std::exception& e) {
            throw IoError("bad suite.meta in " + suite_dir.string() + ": " + e.what());
        }
    }

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(suite_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".record") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.records.push_back(parse_record(read_file(f)));

    std::vector<std::string> extra_backends;
    std::vector<Approach> extra_approaches;
    for (const auto& r : out.records) {
        if (std::find(out.backend_order.begin(), out.backend_order.end(), r.backend_id) == out.backend_order.end() &&
            std::find(extra_backends.begin(), extra_backends.end(), r.backend_id) == extra_backends.end())
            extra_backends.push_back(r.backend_id);
        if (std::find(out.approach_order.begin(), out.approach_order.end(), r.approach) == out.approach_order.end() &&
            std::find(extra_approaches.begin(), extra_approaches.end(), r.approach) == extra_approaches.end())
            extra_approaches.push_back(r.approach);
    }
    std::sort(extra_backends.begin(), extra_backends.end());
    std::sort(extra_approaches.begin(), extra_approaches.end());
    out.backend_order.insert(out.backend_order.end(), extra_backends.begin(), extra_backends.end());
    out.approach_order.insert(out.approach_order.end(), extra_approaches.begin(), extra_approaches.end());
    return out;
}

} // namespace bidhi
