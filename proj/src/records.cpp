#include "bidhi/records.hpp"

#include "bidhi/error.hpp"
#include "bidhi/util.hpp"

namespace bidhi {

std::string_view to_string(Approach a) noexcept {
    switch (a) {
    case Approach::Vanilla: return "VANILLA";
    case Approach::TranslateA: return "TRANSLATE_A";
    case Approach::TranslateB: return "TRANSLATE_B";
    case Approach::TddGenerated: return "TDD_GENERATED";
    case Approach::TddGiven: return "TDD_GIVEN";
    case Approach::TddCombined: return "TDD_COMBINED";
    case Approach::CiVanilla: return "CI_VANILLA";
    case Approach::CiGivenTest: return "CI_GIVEN_TEST";
    }
    return "VANILLA";
}

Approach approach_from_string(std::string_view s) {
    for (auto a : kAllApproaches)
        if (to_string(a) == s) return a;
    throw ConfigError("approaches", "unknown approach '" + std::string(s) + "'");
}

std::vector<Approach> parse_approach_list(std::string_view comma_separated) {
    std::vector<Approach> out;
    while (!comma_separated.empty()) {
        const auto comma = comma_separated.find(',');
        const auto item = trim(comma_separated.substr(0, comma));
        comma_separated = comma == std::string_view::npos ? std::string_view{} : comma_separated.substr(comma + 1);
        if (item.empty()) continue;
        const auto a = approach_from_string(item);
        for (auto existing : out)
            if (existing == a) throw ConfigError("approaches", "duplicate approach '" + std::string(item) + "'");
        out.push_back(a);
    }
    return out;
}

std::string_view to_string(Verdict v) noexcept {
    switch (v) {
    case Verdict::Correct: return "Correct";
    case Verdict::Incorrect: return "Incorrect";
    case Verdict::Infra: return "Infra";
    }
    return "Infra";
}

Verdict verdict_from_string(std::string_view s) {
    if (s == "Correct") return Verdict::Correct;
    if (s == "Incorrect") return Verdict::Incorrect;
    if (s == "Infra") return Verdict::Infra;
    throw Error("unknown verdict '" + std::string(s) + "'");
}

std::string_view to_string(RunFlag f) noexcept {
    switch (f) {
    case RunFlag::TestgenDegraded: return "testgen_degraded";
    case RunFlag::ExtractionFallback: return "extraction_fallback";
    case RunFlag::BackendFailure: return "backend_failure";
    case RunFlag::TranslationFailure: return "translation_failure";
    case RunFlag::SandboxUnavailable: return "sandbox_unavailable";
    case RunFlag::Unscorable: return "unscorable";
    case RunFlag::HiddenTestInPrompt: return "hidden_test_in_prompt";
    }
    return "backend_failure";
}

RunFlag run_flag_from_string(std::string_view s) {
    for (auto f : {RunFlag::TestgenDegraded, RunFlag::ExtractionFallback, RunFlag::BackendFailure,
                   RunFlag::TranslationFailure, RunFlag::SandboxUnavailable, RunFlag::Unscorable,
                   RunFlag::HiddenTestInPrompt})
        if (to_string(f) == s) return f;
    throw Error("unknown run flag '" + std::string(s) + "'");
}

std::string_view to_string(InfraMode m) noexcept {
    return m == InfraMode::CountAsIncorrect ? "incorrect" : "exclude";
}

InfraMode infra_mode_from_string(std::string_view s) {
    if (s == "incorrect") return InfraMode::CountAsIncorrect;
    if (s == "exclude") return InfraMode::Exclude;
    throw ConfigError("infra_mode", "expected 'incorrect' or 'exclude', got '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const RunRecord& r) {
    std::vector<std::string> flags;
    for (auto f : r.flags) flags.emplace_back(to_string(f));
    j = nlohmann::json{{"task_id", r.task_id},
                       {"approach", to_string(r.approach)},
                       {"backend_id", r.backend_id},
                       {"corpus_digest", r.corpus_digest},
                       {"instruction_original", r.instruction_original},
                       {"instruction_used", r.instruction_used},
                       {"injected_tests", r.injected_tests},
                       {"attempts", r.attempts},
                       {"final_code", r.final_code},
                       {"final_exec", nullptr},
                       {"verdict", nullptr},
                       {"score_exec", nullptr},
                       {"flags", flags},
                       {"error", r.error}};
    if (r.final_exec) j["final_exec"] = *r.final_exec;
    if (r.verdict) j["verdict"] = to_string(*r.verdict);
    if (r.score_exec) j["score_exec"] = *r.score_exec;
}

void from_json(const nlohmann::json& j, RunRecord& r) {
    r.task_id = j.at("task_id").get<std::string>();
    r.approach = approach_from_string(j.at("approach").get<std::string>());
    r.backend_id = j.at("backend_id").get<std::string>();
    r.corpus_digest = j.at("corpus_digest").get<std::string>();
    r.instruction_original = j.at("instruction_original").get<std::string>();
    r.instruction_used = j.at("instruction_used").get<std::string>();
    r.injected_tests = j.at("injected_tests").get<std::vector<TestCase>>();
    r.attempts = j.at("attempts").get<std::vector<AttemptRecord>>();
    r.final_code = j.at("final_code").get<std::string>();
    r.final_exec.reset();
    if (const auto& fe = j.at("final_exec"); !fe.is_null()) r.final_exec = fe.get<ExecutionResult>();
    r.verdict.reset();
    if (const auto& v = j.at("verdict"); !v.is_null()) r.verdict = verdict_from_string(v.get<std::string>());
    r.score_exec.reset();
    if (auto it = j.find("score_exec"); it != j.end() && !it->is_null()) r.score_exec = it->get<ExecutionResult>();
    r.flags.clear();
    for (const auto& f : j.at("flags")) r.flags.insert(run_flag_from_string(f.get<std::string>()));
    r.error = j.value("error", std::string{});
}

std::string serialize_record(const RunRecord& r) {
    return nlohmann::json(r).dump();
}

RunRecord parse_record(std::string_view line) {
    try {
        return nlohmann::json::parse(line).get<RunRecord>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed run record: ") + e.what());
    }
}

} // namespace bidhi
