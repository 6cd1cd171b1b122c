#include "bidhi/error.hpp"
#include "bidhi/prompting.hpp"
#include "bidhi/util.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace bidhi;

TEST_CASE("substitution into a user message") {
    PromptTemplate t(TemplateId::Generate, "Solve: {instruction}");
    const auto msgs = render(t, {{"instruction", "X"}});
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0].role == Role::User);
    CHECK(msgs[0].content == "Solve: X");
}

TEST_CASE("system message is prepended when present") {
    PromptTemplate t(TemplateId::Generate, "{instruction}");
    const auto msgs = render(t, {{"instruction", "X"}}, std::string("Be brief."));
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].role == Role::System);
    CHECK(msgs[1].content == "X");
}

TEST_CASE("missing bindings and malformed templates") {
    PromptTemplate repair(TemplateId::Repair, "{code} {error}");
    try {
        repair.substitute({{"code", "x"}});
        FAIL("expected MissingBinding");
    } catch (const MissingBinding& e) {
        CHECK(e.name() == "error");
    }
    CHECK_THROWS_AS(PromptTemplate(TemplateId::Repair, "{code} only"), InvalidTemplate);
    CHECK_THROWS_AS(PromptTemplate(TemplateId::Generate, "{instruction} {nonsense}"), InvalidTemplate);
    CHECK_THROWS_AS(PromptTemplate(TemplateId::GenerateWithTests, "{instruction}"), InvalidTemplate);
}

TEST_CASE("literal braces survive") {
    PromptTemplate t(TemplateId::Generate, "{instruction} {{x}} d = {1: 2} {} { instruction }");
    CHECK(t.substitute({{"instruction", "I"}}) == "I {x} d = {1: 2} {} { instruction }");
    CHECK(t.placeholders() == std::set<std::string>{"instruction"});
}

TEST_CASE("a body without placeholders renders verbatim when the id allows it") {
    PromptTemplate t(TemplateId::Repair, "{code}{error}");
    CHECK(t.substitute({{"code", ""}, {"error", ""}}).empty());
}

TEST_CASE("substituted values are not re-expanded") {
    PromptTemplate t(TemplateId::Generate, "{instruction}");
    CHECK(t.substitute({{"instruction", "use {code} here"}}) == "use {code} here");
}

TEST_CASE("shipped template files match the built-in defaults") {
    const auto files = load_prompt_set(testing::templates_dir());
    const auto builtin = default_prompt_set();
    for (auto id : {TemplateId::Generate, TemplateId::GenerateWithTests, TemplateId::Testgen, TemplateId::Repair}) {
        CAPTURE(to_string(id));
        CHECK(files.get(id).body() == builtin.get(id).body());
    }
    CHECK_FALSE(files.system_message.has_value());
}

TEST_CASE("load_prompt_set errors and optional system message") {
    testing::TempDir dir;
    CHECK_THROWS_AS(load_prompt_set(dir / "missing"), ConfigError);
    CHECK_THROWS_AS(load_prompt_set(dir.path()), ConfigError);
    const auto defaults = default_prompt_set();
    for (auto id : {TemplateId::Generate, TemplateId::GenerateWithTests, TemplateId::Testgen, TemplateId::Repair})
        write_file_atomic(dir / (std::string(to_string(id)) + ".txt"), defaults.get(id).body());
    write_file_atomic(dir / "system.txt", "You write Python.");
    CHECK(load_prompt_set(dir.path()).system_message == "You write Python.");
}

TEST_CASE("extract the def block from surrounding prose") {
    const auto e = extract_code("Here you go:\n```python\ndef add(a,b):\n    return a+b\n```\nEnjoy");
    CHECK(e.code == "def add(a,b):\n    return a+b");
    CHECK(e.origin == ExtractedCode::Origin::FencedBlock);
}

TEST_CASE("prefer the block that defines a function") {
    const auto e = extract_code("```\nThis explains the idea.\n```\nthen\n```python\ndef f(x):\n    return x\n```");
    CHECK(e.code == "def f(x):\n    return x");
}

TEST_CASE("first non-empty block when none defines a function") {
    const auto e = extract_code("```\n\n```\n```python\nprint(1)\n```");
    CHECK(e.code == "print(1)");
    CHECK(e.origin == ExtractedCode::Origin::FencedBlock);
}

TEST_CASE("whole response fallback") {
    const auto e = extract_code("def add(a,b): return a+b");
    CHECK(e.code == "def add(a,b): return a+b");
    CHECK(e.origin == ExtractedCode::Origin::WholeResponseFallback);
    CHECK_THROWS_AS(extract_code(" \n\t"), EmptyResponse);
}

TEST_CASE("fence edge cases") {
    CHECK(fenced_blocks("```python\r\ndef f():\r\n    pass\r\n```\r\n") == std::vector<std::string>{"def f():\n    pass"});
    CHECK(fenced_blocks("```py\ndef f(): pass") == std::vector<std::string>{"def f(): pass"});
    CHECK(fenced_blocks("````\na\n```\nb\n````") == std::vector<std::string>{"a\n```\nb"});
    CHECK(fenced_blocks("no fences").empty());
    CHECK(fenced_blocks("```a\n1\n```\n```b\n2\n```").size() == 2);
}

TEST_CASE("tests block formatting") {
    const std::vector<std::string> one{"assert f(1)==2"};
    CHECK(format_tests_block(one) == std::string(kTestsHeader) + "\nassert f(1)==2");
    CHECK(format_tests_block(std::vector<std::string>{}).empty());
    try {
        format_tests_block(std::vector<std::string>{"x = 1"});
        FAIL("expected NonAssertEntry");
    } catch (const NonAssertEntry& e) {
        CHECK(e.index() == 0);
    }
}
