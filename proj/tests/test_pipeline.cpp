#include "bidhi/error.hpp"
#include "bidhi/pipeline.hpp"
#include "bidhi/util.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace bidhi;
using bidhi::testing::fenced;
using bidhi::testing::ScriptedBackend;

namespace {

Sandbox& sandbox() {
    static Sandbox s;
    return s;
}

const TaskRecord kAdd =
    testing::make_task("t1", "add", "assert add(1,2)==3", {"assert add(2,2)==4", "assert add(-1,1)==0", "assert add(0,0)==0"},
                       "দুটি সংখ্যা যোগ করুন");
const std::string kAddCode = "def add(a, b):\n    return a + b";

std::string all_prompt_text(const RunRecord& r) {
    std::string out;
    for (const auto& a : r.attempts)
        for (const auto& m : a.prompt) out += m.content + "\n";
    return out;
}

RunRecord run(const TaskRecord& task, Approach a, ScriptedBackend& b, const Translators& t = {},
              PipelineConfig config = {}) {
    return run_task(task, a, b, sandbox(), t, config);
}

} // namespace

TEST_CASE("TDD_GIVEN injects only the given test") {
    ScriptedBackend b([](auto, auto) { return fenced(kAddCode); });
    const auto r = run(kAdd, Approach::TddGiven, b);
    REQUIRE(r.injected_tests.size() == 1);
    CHECK(r.injected_tests[0] == TestCase{"assert add(1,2)==3", TestSource::Given});
    CHECK(r.attempts.size() == 1);
    REQUIRE(r.final_exec.has_value());
    CHECK(r.final_exec->status == ExecStatus::Success);
    CHECK(r.final_code == kAddCode);
    CHECK(b.calls()[0].request.back().content.find(std::string(kTestsHeader) + "\nassert add(1,2)==3") !=
          std::string::npos);
    CHECK_FALSE(r.verdict.has_value());
}

TEST_CASE("CI_GIVEN_TEST repairs a given-test failure") {
    ScriptedBackend b([](auto, const CallKey& key) {
        return key.attempt == 0 ? fenced("def add(a, b):\n    return a - b") : fenced(kAddCode);
    });
    const auto r = run(kAdd, Approach::CiGivenTest, b);
    REQUIRE(r.attempts.size() == 2);
    CHECK(r.attempts[0].exec.status == ExecStatus::AssertFailure);
    CHECK(r.attempts[1].prompt.back().content.find(r.attempts[0].exec.stderr_text) != std::string::npos);
    CHECK(r.final_exec->status == ExecStatus::Success);
}

TEST_CASE("CI_VANILLA repairs compile errors only") {
    ScriptedBackend b([](auto, const CallKey& key) {
        return key.attempt == 0 ? fenced("def add(a, b:\n    pass") : fenced("def add(a, b):\n    return 0");
    });
    const auto r = run(kAdd, Approach::CiVanilla, b);
    CHECK(r.attempts.size() == 2);
    CHECK(r.injected_tests.empty());
    CHECK(r.final_exec->status == ExecStatus::Success);
}

TEST_CASE("non-CI approaches generate exactly once") {
    for (auto a : {Approach::Vanilla, Approach::TddGiven, Approach::TddGenerated, Approach::TddCombined}) {
        CAPTURE(to_string(a));
        ScriptedBackend b([](auto, const CallKey& key) {
            return key.stage == Stage::TestGeneration ? std::string("nothing") : fenced("def add(a, b:");
        });
        const auto r = run(kAdd, a, b);
        CHECK(r.attempts.size() == 1);
        CHECK(r.final_exec->status == ExecStatus::CompileError);
    }
}

TEST_CASE("TDD_COMBINED with five surviving tests injects six, given first") {
    ScriptedBackend b([](auto, const CallKey& key) {
        if (key.stage == Stage::TestGeneration)
            return std::string("assert add(1,1)==2\nassert add(2,3)==5\nassert add(0,0)==0\nassert add(5,5)==10\n"
                               "assert add(9,1)==10\nassert add(7,7)==14\nassert add(3,3)==6");
        return fenced(kAddCode);
    });
    const auto r = run(kAdd, Approach::TddCombined, b);
    REQUIRE(r.injected_tests.size() == 6);
    CHECK(r.injected_tests[0].source == TestSource::Given);
    CHECK(r.injected_tests[0].assert_text == kAdd.given_test);
    CHECK(r.injected_tests[5].assert_text == "assert add(9,1)==10");
    CHECK(b.call_count() == 2);
}

TEST_CASE("TDD_GENERATED survives a failed test-generation call") {
    ScriptedBackend b([](auto, const CallKey& key) -> std::string {
        if (key.stage == Stage::TestGeneration) throw BackendTimeout("slow");
        return fenced(kAddCode);
    });
    const auto r = run(kAdd, Approach::TddGenerated, b);
    CHECK(r.has(RunFlag::TestgenDegraded));
    CHECK(r.injected_tests.empty());
    CHECK(r.final_exec->status == ExecStatus::Success);
    CHECK_FALSE(r.verdict.has_value());
}

TEST_CASE("translation arms use the translated instruction") {
    Translators t{std::make_shared<StubTranslator>(std::map<std::string, std::string>{{kAdd.instruction, "Add two numbers."}}),
                  std::make_shared<StubTranslator>(std::map<std::string, std::string>{})};
    ScriptedBackend b([](auto, auto) { return fenced(kAddCode); });
    const auto ra = run(kAdd, Approach::TranslateA, b, t);
    CHECK(ra.instruction_used == "Add two numbers.");
    CHECK(ra.instruction_original == kAdd.instruction);
    CHECK(b.calls()[0].request.back().content.find("Add two numbers.") != std::string::npos);
    CHECK(b.calls()[0].request.back().content.find(kAdd.instruction) == std::string::npos);

    const auto rb = run(kAdd, Approach::TranslateB, b, t);
    CHECK(rb.verdict == Verdict::Infra);
    CHECK(rb.has(RunFlag::TranslationFailure));
    CHECK(rb.attempts.empty());
    CHECK(b.call_count() == 1);

    const auto none = run(kAdd, Approach::TranslateA, b, Translators{});
    CHECK(none.has(RunFlag::TranslationFailure));
}

TEST_CASE("backend failures become Infra records") {
    ScriptedBackend b([](auto, auto) -> std::string { throw BackendHttpError(503, "down"); });
    auto r = run(kAdd, Approach::Vanilla, b);
    CHECK(r.verdict == Verdict::Infra);
    CHECK(r.has(RunFlag::BackendFailure));
    CHECK_FALSE(r.final_exec.has_value());
    CHECK(score_run(r, kAdd, sandbox(), 5) == Verdict::Infra);
}

TEST_CASE("unfenced responses are flagged") {
    ScriptedBackend b([](auto, auto) { return kAddCode; });
    const auto r = run(kAdd, Approach::Vanilla, b);
    CHECK(r.has(RunFlag::ExtractionFallback));
    CHECK(r.final_exec->status == ExecStatus::Success);
}

TEST_CASE("scoring against hidden tests") {
    ScriptedBackend good([](auto, auto) { return fenced(kAddCode); });
    auto r = run(kAdd, Approach::Vanilla, good);
    CHECK(score_run(r, kAdd, sandbox(), 5) == Verdict::Correct);
    REQUIRE(r.score_exec.has_value());

    // Passes the given test, fails hidden test 2.
    ScriptedBackend overfit([](auto, auto) {
        return fenced("def add(a, b):\n    return 3 if (a, b) == (1, 2) else a + b + (a < 0)");
    });
    r = run(kAdd, Approach::CiGivenTest, overfit);
    CHECK(r.final_exec->status == ExecStatus::Success);
    CHECK(score_run(r, kAdd, sandbox(), 5) == Verdict::Incorrect);
    CHECK(r.score_exec->failing_assert_index == 1);

    auto no_hidden = kAdd;
    no_hidden.hidden_tests.clear();
    r = run(no_hidden, Approach::Vanilla, good);
    CHECK_FALSE(score_run(r, no_hidden, sandbox(), 5).has_value());
    CHECK(r.has(RunFlag::Unscorable));
    CHECK_FALSE(r.verdict.has_value());
}

TEST_CASE("hidden tests never reach a prompt") {
    Translators t{std::make_shared<IdentityTranslator>(), std::make_shared<IdentityTranslator>()};
    for (auto a : kAllApproaches) {
        CAPTURE(to_string(a));
        ScriptedBackend b([](auto, const CallKey& key) {
            if (key.stage == Stage::TestGeneration) return std::string("assert add(1,1)==2");
            return key.attempt == 0 ? fenced("def add(a, b:") : fenced(kAddCode);
        });
        auto r = run(kAdd, a, b, t);
        score_run(r, kAdd, sandbox(), 5);
        CHECK(leaked_hidden_tests(r, kAdd).empty());
        CHECK_FALSE(r.has(RunFlag::HiddenTestInPrompt));
        for (const auto& call : b.calls())
            for (const auto& m : call.request)
                for (const auto& h : kAdd.hidden_tests) CHECK(m.content.find(h) == std::string::npos);
    }
}

TEST_CASE("a hidden test that appears in the instruction is flagged") {
    auto leaky = kAdd;
    leaky.instruction = "Add numbers so that assert add(2,2)==4 holds.";
    ScriptedBackend b([](auto, auto) { return fenced(kAddCode); });
    auto r = run(leaky, Approach::Vanilla, b);
    score_run(r, leaky, sandbox(), 5);
    CHECK(leaked_hidden_tests(r, leaky) == std::vector<std::string>{"assert add(2,2)==4"});
    CHECK(r.has(RunFlag::HiddenTestInPrompt));
}

TEST_CASE("a generated test equal to a hidden one is not a leak") {
    ScriptedBackend b([](auto, const CallKey& key) {
        return key.stage == Stage::TestGeneration ? std::string("assert add(2,2)==4") : fenced(kAddCode);
    });
    auto r = run(kAdd, Approach::TddGenerated, b);
    CHECK(leaked_hidden_tests(r, kAdd).empty());
}

TEST_CASE("run_suite produces the full grid in a fixed order") {
    testing::TempDir dir;
    const std::vector<TaskRecord> corpus{testing::synthetic_task(0), testing::synthetic_task(1)};
    const std::vector<Approach> approaches{Approach::Vanilla, Approach::CiGivenTest};
    auto backend = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
    const std::vector<std::shared_ptr<ChatBackend>> backends{backend};
    SuiteOptions opt;
    opt.run_dir = dir.path();
    const auto result = run_suite(corpus, approaches, backends, sandbox(), {}, {}, opt);
    REQUIRE(result.records.size() == 4);
    CHECK(result.executed == 4);
    CHECK(result.records[0].task_id == "S00");
    CHECK(result.records[0].approach == Approach::Vanilla);
    CHECK(result.records[1].approach == Approach::CiGivenTest);
    CHECK(result.records[2].task_id == "S01");
    CHECK(result.suite_dir == dir.path() / default_suite_id(corpus_digest(corpus)));

    const SuiteLayout layout{result.suite_dir};
    CHECK(std::filesystem::exists(layout.meta()));
    CHECK(std::filesystem::exists(layout.matrix()));
    CHECK(std::filesystem::exists(layout.record("synth", Approach::Vanilla, "S00")));
    CHECK(std::filesystem::exists(layout.attempt_dir("synth", Approach::Vanilla, "S00", 0) / "candidate.py"));
    CHECK(read_transcript(layout.transcript("synth")).size() == backend->call_count());

    const auto loaded = load_suite(result.suite_dir);
    CHECK(loaded.records.size() == 4);
    CHECK(loaded.backend_order == std::vector<std::string>{"synth"});
    CHECK(loaded.approach_order == approaches);
    CHECK(aggregate(loaded.records, loaded.backend_order, loaded.approach_order) == result.matrix);
}

TEST_CASE("resume regenerates only missing cells") {
    testing::TempDir dir;
    const std::vector<TaskRecord> corpus{testing::synthetic_task(2), testing::synthetic_task(3)};
    const std::vector<Approach> approaches{Approach::Vanilla, Approach::TddGiven};
    SuiteOptions opt;
    opt.run_dir = dir.path();
    auto first = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
    const auto r1 = run_suite(corpus, approaches, std::vector<std::shared_ptr<ChatBackend>>{first}, sandbox(), {}, {}, opt);
    const SuiteLayout layout{r1.suite_dir};
    std::filesystem::remove(layout.record("synth", Approach::TddGiven, "S03"));
    const auto before = read_transcript(layout.transcript("synth")).size();

    auto second = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
    const auto r2 = run_suite(corpus, approaches, std::vector<std::shared_ptr<ChatBackend>>{second}, sandbox(), {}, {}, opt);
    CHECK(second->call_count() == 1);
    CHECK(r2.executed == 1);
    CHECK(r2.resumed == 3);
    CHECK(read_transcript(layout.transcript("synth")).size() == before + 1);
    CHECK(read_file(layout.matrix()) == format_matrix_csv(r1.matrix));
}

TEST_CASE("records from a different corpus are not reused") {
    testing::TempDir dir;
    SuiteOptions opt;
    opt.run_dir = dir.path();
    opt.suite_id = "fixed";
    const std::vector<Approach> approaches{Approach::Vanilla};
    auto b1 = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
    run_suite(std::vector<TaskRecord>{testing::synthetic_task(0)}, approaches,
              std::vector<std::shared_ptr<ChatBackend>>{b1}, sandbox(), {}, {}, opt);
    auto changed = testing::synthetic_task(0);
    changed.hidden_tests.push_back("assert f0(10) == 20");
    auto b2 = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
    const auto r = run_suite(std::vector<TaskRecord>{changed}, approaches,
                             std::vector<std::shared_ptr<ChatBackend>>{b2}, sandbox(), {}, {}, opt);
    CHECK(r.executed == 1);
    CHECK(b2->call_count() == 1);
}

TEST_CASE("infra records are retried on resume") {
    testing::TempDir dir;
    SuiteOptions opt;
    opt.run_dir = dir.path();
    const std::vector<TaskRecord> corpus{testing::synthetic_task(4)};
    const std::vector<Approach> approaches{Approach::Vanilla};
    auto down = std::make_shared<ScriptedBackend>([](auto, auto) -> std::string { throw BackendHttpError(0, "refused"); },
                                                  "synth");
    auto r1 = run_suite(corpus, approaches, std::vector<std::shared_ptr<ChatBackend>>{down}, sandbox(), {}, {}, opt);
    CHECK(r1.infra == 1);
    CHECK(r1.matrix.at("synth", Approach::Vanilla).accuracy.value == 0);

    opt.infra_mode = InfraMode::Exclude;
    r1 = run_suite(corpus, approaches, std::vector<std::shared_ptr<ChatBackend>>{down}, sandbox(), {}, {}, opt);
    CHECK_FALSE(r1.matrix.contains("synth", Approach::Vanilla));

    auto up = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
    const auto r2 = run_suite(corpus, approaches, std::vector<std::shared_ptr<ChatBackend>>{up}, sandbox(), {}, {}, opt);
    CHECK(r2.executed == 1);
    CHECK(r2.infra == 0);
}

TEST_CASE("unscored runs are scored when resumed with scoring on") {
    testing::TempDir dir;
    SuiteOptions opt;
    opt.run_dir = dir.path();
    opt.score = false;
    const std::vector<TaskRecord> corpus{testing::synthetic_task(5)};
    const std::vector<Approach> approaches{Approach::CiGivenTest};
    auto b = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
    const auto r1 = run_suite(corpus, approaches, std::vector<std::shared_ptr<ChatBackend>>{b}, sandbox(), {}, {}, opt);
    CHECK_FALSE(r1.records[0].verdict.has_value());
    CHECK(r1.matrix.size() == 0);
    opt.score = true;
    const auto r2 = run_suite(corpus, approaches, std::vector<std::shared_ptr<ChatBackend>>{b}, sandbox(), {}, {}, opt);
    CHECK(r2.resumed == 1);
    CHECK(r2.records[0].verdict.has_value());
    CHECK(r2.matrix.size() == 1);
}

TEST_CASE("parallel and serial runs agree byte for byte") {
    const auto corpus = testing::synthetic_corpus(6);
    const std::vector<Approach> approaches{Approach::Vanilla, Approach::TddCombined, Approach::CiVanilla};
    std::string matrices[2];
    int i = 0;
    for (int parallelism : {1, 8}) {
        testing::TempDir dir;
        SuiteOptions opt;
        opt.run_dir = dir.path();
        opt.parallelism = parallelism;
        auto b = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
        const auto r = run_suite(corpus, approaches, std::vector<std::shared_ptr<ChatBackend>>{b}, sandbox(), {}, {}, opt);
        matrices[i++] = read_file(SuiteLayout{r.suite_dir}.matrix());
    }
    CHECK(matrices[0] == matrices[1]);
    CHECK(matrices[0].find("synth,TDD_COMBINED") != std::string::npos);
}

TEST_CASE("cancellation leaves unfinished cells for a later resume") {
    testing::TempDir dir;
    std::atomic<bool> cancel{true};
    SuiteOptions opt;
    opt.run_dir = dir.path();
    opt.cancel = &cancel;
    auto b = std::make_shared<ScriptedBackend>(testing::synthetic_script(), "synth");
    const auto r = run_suite(testing::synthetic_corpus(2), std::vector<Approach>{Approach::Vanilla},
                             std::vector<std::shared_ptr<ChatBackend>>{b}, sandbox(), {}, {}, opt);
    CHECK(r.cancelled);
    CHECK(r.records.empty());
    CHECK(b->call_count() == 0);
}

TEST_CASE("parallelism must be positive") {
    SuiteOptions opt;
    opt.parallelism = 0;
    CHECK_THROWS_AS(run_suite({}, {}, {}, sandbox(), {}, {}, opt), ConfigError);
}
