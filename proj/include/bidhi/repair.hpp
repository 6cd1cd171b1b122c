#pragma once

#include "bidhi/backends.hpp"
#include "bidhi/prompting.hpp"
#include "bidhi/sandbox.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bidhi {

/// One generation and its execution.
struct AttemptRecord {
    int attempt_index = 0;
    std::vector<ChatMessage> prompt;
    std::string response;
    ExtractedCode code;
    ExecutionResult exec;
};

void to_json(nlohmann::json& j, const AttemptRecord& a);
void from_json(const nlohmann::json& j, AttemptRecord& a);

enum class RepairOn { CompileOnly, AnyFailure };

std::string_view to_string(RepairOn mode) noexcept;
RepairOn repair_on_from_string(std::string_view s);

struct RepairLoopConfig {
    int max_repairs = 5;
    double per_exec_timeout = 10.0;
    RepairOn repair_on = RepairOn::CompileOnly;

    void validate() const;
};

/// Everything one loop needs besides the backend and the sandbox.
struct RepairRequest {
    std::string task_id;
    std::string approach;
    std::vector<ChatMessage> initial_prompt;
    const PromptTemplate* repair_template = nullptr;
    /// Extra bindings for the repair template (instruction, entry_point,
    /// tests); `code` and `error` are filled per attempt.
    std::map<std::string, std::string> bindings;
    std::vector<std::string> tests_for_loop;
};

struct RepairOutcome {
    std::vector<AttemptRecord> attempts;
    /// Set when a backend call ended the loop early.
    std::optional<std::string> backend_error;

    const AttemptRecord* last() const noexcept { return attempts.empty() ? nullptr : &attempts.back(); }
};

/// Generates, executes, and while the trigger holds and repairs remain,
/// continues the chat with the repair template bound to the previous code
/// and its stderr. Attempt 0 uses Stage::Generation, later ones
/// Stage::Repair. Produces between 1 and 1 + max_repairs attempts unless
/// the very first call fails.
RepairOutcome repair_loop(const RepairRequest& request, ChatBackend& backend, Sandbox& sandbox,
                          const RepairLoopConfig& config);

/// Whether `status` asks for another repair under `mode`.
bool repair_triggered(RepairOn mode, ExecStatus status) noexcept;

} // namespace bidhi
