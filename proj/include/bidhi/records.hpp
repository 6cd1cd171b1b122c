#pragma once

#include "bidhi/repair.hpp"
#include "bidhi/sandbox.hpp"
#include "bidhi/tddgen.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bidhi {

/// The eight experimental conditions, in table column order.
enum class Approach {
    Vanilla,
    TranslateA,
    TranslateB,
    TddGenerated,
    TddGiven,
    TddCombined,
    CiVanilla,
    CiGivenTest,
};

inline constexpr std::array<Approach, 8> kAllApproaches{
    Approach::Vanilla,      Approach::TranslateA, Approach::TranslateB, Approach::TddGenerated,
    Approach::TddGiven,     Approach::TddCombined, Approach::CiVanilla, Approach::CiGivenTest,
};

/// VANILLA, TRANSLATE_A, ... as spelled on the command line and in files.
std::string_view to_string(Approach a) noexcept;
Approach approach_from_string(std::string_view s);
std::vector<Approach> parse_approach_list(std::string_view comma_separated);

enum class Verdict { Correct, Incorrect, Infra };

std::string_view to_string(Verdict v) noexcept;
Verdict verdict_from_string(std::string_view s);

enum class RunFlag {
    TestgenDegraded,
    ExtractionFallback,
    BackendFailure,
    TranslationFailure,
    SandboxUnavailable,
    Unscorable,
    HiddenTestInPrompt,
};

std::string_view to_string(RunFlag f) noexcept;
RunFlag run_flag_from_string(std::string_view s);

/// Full provenance of one (task, approach, backend) cell.
struct RunRecord {
    std::string task_id;
    Approach approach = Approach::Vanilla;
    std::string backend_id;
    std::string corpus_digest;
    std::string instruction_original;
    std::string instruction_used;
    std::vector<TestCase> injected_tests;
    std::vector<AttemptRecord> attempts;
    std::string final_code;
    std::optional<ExecutionResult> final_exec;
    /// Unset until scored.
    std::optional<Verdict> verdict;
    /// The scoring execution against hidden tests.
    std::optional<ExecutionResult> score_exec;
    std::set<RunFlag> flags;
    std::string error;

    bool has(RunFlag f) const noexcept { return flags.contains(f); }
};

void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

std::string serialize_record(const RunRecord& r);
RunRecord parse_record(std::string_view line);

/// How Infra verdicts enter metric denominators.
enum class InfraMode { CountAsIncorrect, Exclude };

std::string_view to_string(InfraMode m) noexcept;
InfraMode infra_mode_from_string(std::string_view s);

} // namespace bidhi
