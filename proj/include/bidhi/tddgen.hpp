#pragma once

#include "bidhi/backends.hpp"
#include "bidhi/dataset.hpp"
#include "bidhi/prompting.hpp"
#include "bidhi/sandbox.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bidhi {

enum class TestSource { Given, Generated };

std::string_view to_string(TestSource source) noexcept;

struct TestCase {
    std::string assert_text;
    TestSource source = TestSource::Generated;

    friend bool operator==(const TestCase&, const TestCase&) = default;
};

void to_json(nlohmann::json& j, const TestCase& t);
void from_json(const nlohmann::json& j, TestCase& t);

enum class TddVariant { Generated, Given, Combined };

inline constexpr int kDefaultTestLimit = 5;

/// Every `assert`-prefixed line in the response, inside or outside fences,
/// with list markers ("- ", "1. ") stripped. Order preserved, no filtering.
std::vector<std::string> extract_assert_candidates(std::string_view response);

/// Keeps candidates that start with `assert`, mention `entry_point` as a
/// whole word, and byte-compile; drops exact duplicates (first wins) and
/// truncates to `limit`.
std::vector<TestCase> filter_generated_tests(std::span<const std::string> candidates,
                                             std::string_view entry_point, int limit, Sandbox& sandbox);

/// One testgen call, then filter_generated_tests on its answer. Backend
/// errors propagate; unusable output yields an empty list.
std::vector<TestCase> generate_tests(const TaskRecord& task, ChatBackend& backend, const PromptSet& prompts,
                                     Sandbox& sandbox, const CallKey& key, int limit = kDefaultTestLimit);

/// GENERATED: `generated` as-is. GIVEN: just the given test. COMBINED:
/// the given test first, then generated tests that differ from it, capped
/// at 1 + limit entries.
std::vector<TestCase> assemble_tests(TddVariant variant, const TaskRecord& task,
                                     std::span<const TestCase> generated, int limit = kDefaultTestLimit);

std::vector<std::string> assert_texts(std::span<const TestCase> tests);

} // namespace bidhi
