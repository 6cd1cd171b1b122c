#include "bidhi/error.hpp"
#include "bidhi/repair.hpp"

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

const PromptSet kPrompts = default_prompt_set();

RepairRequest request(std::vector<std::string> tests = {}) {
    RepairRequest r;
    r.task_id = "T1";
    r.approach = "CI_VANILLA";
    r.initial_prompt = {{Role::User, "write f"}};
    r.repair_template = &kPrompts.repair;
    r.bindings = {{"instruction", "write f"}, {"entry_point", "f"}};
    r.tests_for_loop = std::move(tests);
    return r;
}

RepairLoopConfig config(int max_repairs, RepairOn on) {
    RepairLoopConfig c;
    c.max_repairs = max_repairs;
    c.repair_on = on;
    return c;
}

} // namespace

TEST_CASE("always broken code exhausts the repair budget") {
    ScriptedBackend b([](auto, auto) { return fenced("def f(:"); });
    const auto out = repair_loop(request(), b, sandbox(), config(5, RepairOn::CompileOnly));
    CHECK(b.call_count() == 6);
    REQUIRE(out.attempts.size() == 6);
    CHECK(out.last()->exec.status == ExecStatus::CompileError);
    CHECK_FALSE(out.backend_error.has_value());
    const auto calls = b.calls();
    CHECK(calls[0].key.stage == Stage::Generation);
    for (int i = 1; i < 6; ++i) {
        CHECK(calls[i].key.stage == Stage::Repair);
        CHECK(calls[i].key.attempt == i);
        CHECK(calls[i].request.back().content.find(out.attempts[i - 1].exec.stderr_text) != std::string::npos);
    }
}

TEST_CASE("fix on the second attempt stops the loop") {
    ScriptedBackend b([](auto, const CallKey& key) {
        return key.attempt == 0 ? fenced("def f(:") : fenced("def f(x):\n    return x");
    });
    const auto out = repair_loop(request({"assert f(1) == 1"}), b, sandbox(), config(5, RepairOn::AnyFailure));
    CHECK(b.call_count() == 2);
    REQUIRE(out.attempts.size() == 2);
    CHECK(out.last()->exec.status == ExecStatus::Success);
    const auto& repair_prompt = out.attempts[1].prompt;
    REQUIRE(repair_prompt.size() == 3);
    CHECK(repair_prompt[0].content == "write f");
    CHECK(repair_prompt[1].role == Role::Assistant);
    CHECK(repair_prompt[2].content.find(out.attempts[0].exec.stderr_text) != std::string::npos);
    CHECK(repair_prompt[2].content.find("def f(:") != std::string::npos);
}

TEST_CASE("compile_only ignores failing asserts") {
    ScriptedBackend b([](auto, auto) { return fenced("def f(x):\n    return 0"); });
    const auto out = repair_loop(request({"assert f(1) == 1"}), b, sandbox(), config(5, RepairOn::CompileOnly));
    CHECK(b.call_count() == 1);
    CHECK(out.last()->exec.status == ExecStatus::AssertFailure);
}

TEST_CASE("any_failure repairs an assert failure and shows it to the model") {
    ScriptedBackend b([](auto, const CallKey& key) {
        return key.attempt == 0 ? fenced("def f(x):\n    return 0") : fenced("def f(x):\n    return x");
    });
    const auto out = repair_loop(request({"assert f(1) == 1"}), b, sandbox(), config(5, RepairOn::AnyFailure));
    REQUIRE(out.attempts.size() == 2);
    CHECK(out.attempts[1].prompt.back().content.find("Failed test 0: assert f(1) == 1") != std::string::npos);
}

TEST_CASE("zero repairs means one generation") {
    ScriptedBackend b([](auto, auto) { return fenced("def f(:"); });
    const auto out = repair_loop(request(), b, sandbox(), config(0, RepairOn::CompileOnly));
    CHECK(out.attempts.size() == 1);
}

TEST_CASE("backend failures end the loop without throwing") {
    ScriptedBackend failing([](auto, const CallKey& key) -> std::string {
        if (key.attempt == 1) throw BackendTimeout("slow");
        return fenced("def f(:");
    });
    auto out = repair_loop(request(), failing, sandbox(), config(5, RepairOn::CompileOnly));
    CHECK(out.attempts.size() == 1);
    REQUIRE(out.backend_error.has_value());
    CHECK(out.backend_error->find("slow") != std::string::npos);

    ScriptedBackend empty([](auto, auto) { return std::string("  \n"); });
    out = repair_loop(request(), empty, sandbox(), config(5, RepairOn::CompileOnly));
    CHECK(out.attempts.empty());
    CHECK(out.backend_error.has_value());
}

TEST_CASE("trigger table and config validation") {
    CHECK(repair_triggered(RepairOn::CompileOnly, ExecStatus::CompileError));
    CHECK_FALSE(repair_triggered(RepairOn::CompileOnly, ExecStatus::RuntimeError));
    CHECK(repair_triggered(RepairOn::AnyFailure, ExecStatus::Timeout));
    CHECK_FALSE(repair_triggered(RepairOn::AnyFailure, ExecStatus::Success));
    CHECK_THROWS_AS(config(-1, RepairOn::CompileOnly).validate(), ConfigError);
    CHECK(repair_on_from_string("any_failure") == RepairOn::AnyFailure);
    CHECK_THROWS_AS(repair_on_from_string("always"), ConfigError);
}
