#include "bidhi/tddgen.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

#include <regex>
#include <set>

namespace bidhi {

namespace {

std::string_view strip_list_marker(std::string_view line) {
    if (line.starts_with("- ") || line.starts_with("* ")) return trim(line.substr(2));
    std::size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') ++i;
    if (i > 0 && i + 1 < line.size() && (line[i] == '.' || line[i] == ')') && line[i + 1] == ' ')
        return trim(line.substr(i + 2));
    return line;
}

bool mentions_word(std::string_view text, std::string_view word) {
    auto is_word = [](char c) { return c == '_' || std::isalnum(static_cast<unsigned char>(c)) != 0; };
    for (auto pos = text.find(word); pos != std::string_view::npos; pos = text.find(word, pos + 1)) {
        const bool left = pos == 0 || !is_word(text[pos - 1]);
        const auto end = pos + word.size();
        const bool right = end == text.size() || !is_word(text[end]);
        if (left && right) return true;
    }
    return false;
}

} // namespace

std::string_view to_string(TestSource source) noexcept {
    return source == TestSource::Given ? "given" : "generated";
}

void to_json(nlohmann::json& j, const TestCase& t) {
    j = nlohmann::json{{"assert_text", t.assert_text}, {"source", to_string(t.source)}};
}

void from_json(const nlohmann::json& j, TestCase& t) {
    t.assert_text = j.at("assert_text").get<std::string>();
    const auto src = j.at("source").get<std::string>();
    if (src == "given")
        t.source = TestSource::Given;
    else if (src == "generated")
        t.source = TestSource::Generated;
    else
        throw Error("unknown test source '" + src + "'");
}

std::vector<std::string> extract_assert_candidates(std::string_view response) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= response.size()) {
        const auto nl = response.find('\n', pos);
        auto line = response.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? response.size() + 1 : nl + 1;
        line = strip_list_marker(trim(line));
        if (starts_with_assert(line)) out.emplace_back(line);
    }
    return out;
}

std::vector<TestCase> filter_generated_tests(std::span<const std::string> candidates,
                                             std::string_view entry_point, int limit, Sandbox& sandbox) {
    std::vector<std::string> shaped;
    std::set<std::string> seen;
    for (const auto& raw : candidates) {
        const std::string c(trim(raw));
        if (!starts_with_assert(c) || c.find('\n') != std::string::npos) continue;
        if (!mentions_word(c, entry_point)) continue;
        if (!seen.insert(c).second) continue;
        shaped.push_back(c);
    }
    const auto ok = sandbox.parse_each(shaped);
    std::vector<TestCase> out;
    for (std::size_t i = 0; i < shaped.size() && static_cast<int>(out.size()) < limit; ++i)
        if (ok[i]) out.push_back({shaped[i], TestSource::Generated});
    return out;
}

std::vector<TestCase> generate_tests(const TaskRecord& task, ChatBackend& backend, const PromptSet& prompts,
                                     Sandbox& sandbox, const CallKey& key, int limit) {
    if (limit < 1) throw Error("generate_tests: limit must be >= 1");
    const auto messages = render(prompts.testgen,
                                 {{"instruction", task.instruction}, {"entry_point", task.entry_point}},
                                 prompts.system_message);
    const auto response = backend.complete(messages, key);
    const auto candidates = extract_assert_candidates(response);
    return filter_generated_tests(candidates, task.entry_point, limit, sandbox);
}

std::vector<TestCase> assemble_tests(TddVariant variant, const TaskRecord& task,
                                     std::span<const TestCase> generated, int limit) {
    switch (variant) {
    case TddVariant::Generated: return {generated.begin(), generated.end()};
    case TddVariant::Given: return {TestCase{std::string(trim(task.given_test)), TestSource::Given}};
    case TddVariant::Combined: {
        const std::string given(trim(task.given_test));
        std::vector<TestCase> out{TestCase{given, TestSource::Given}};
        for (const auto& t : generated) {
            if (static_cast<int>(out.size()) >= 1 + limit) break;
            if (trim(t.assert_text) == given) continue;
            out.push_back(t);
        }
        return out;
    }
    }
    return {};
}

std::vector<std::string> assert_texts(std::span<const TestCase> tests) {
    std::vector<std::string> out;
    out.reserve(tests.size());
    for (const auto& t : tests) out.push_back(t.assert_text);
    return out;
}

} // namespace bidhi
