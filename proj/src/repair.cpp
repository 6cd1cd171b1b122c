#include "bidhi/repair.hpp"

#include "bidhi/error.hpp"

namespace bidhi {

void to_json(nlohmann::json& j, const AttemptRecord& a) {
    j = nlohmann::json{{"attempt_index", a.attempt_index},
                       {"prompt", a.prompt},
                       {"response", a.response},
                       {"code", a.code.code},
                       {"code_origin", to_string(a.code.origin)},
                       {"exec", a.exec}};
}

void from_json(const nlohmann::json& j, AttemptRecord& a) {
    a.attempt_index = j.at("attempt_index").get<int>();
    a.prompt = j.at("prompt").get<std::vector<ChatMessage>>();
    a.response = j.at("response").get<std::string>();
    a.code.code = j.at("code").get<std::string>();
    a.code.origin = origin_from_string(j.at("code_origin").get<std::string>());
    a.exec = j.at("exec").get<ExecutionResult>();
}

std::string_view to_string(RepairOn mode) noexcept {
    return mode == RepairOn::CompileOnly ? "compile_only" : "any_failure";
}

RepairOn repair_on_from_string(std::string_view s) {
    if (s == "compile_only") return RepairOn::CompileOnly;
    if (s == "any_failure") return RepairOn::AnyFailure;
    throw ConfigError("repair_on", "expected compile_only or any_failure, got '" + std::string(s) + "'");
}

void RepairLoopConfig::validate() const {
    if (max_repairs < 0) throw ConfigError("max_repairs", "must be >= 0");
    if (!(per_exec_timeout > 0)) throw ConfigError("per_exec_timeout", "must be > 0");
}

bool repair_triggered(RepairOn mode, ExecStatus status) noexcept {
    if (mode == RepairOn::CompileOnly) return status == ExecStatus::CompileError;
    return status != ExecStatus::Success;
}

RepairOutcome repair_loop(const RepairRequest& request, ChatBackend& backend, Sandbox& sandbox,
                          const RepairLoopConfig& config) {
    config.validate();
    if (request.repair_template == nullptr) throw Error("repair_loop: no repair template");

    RepairOutcome out;
    std::vector<ChatMessage> prompt = request.initial_prompt;
    for (int attempt = 0; attempt <= config.max_repairs; ++attempt) {
        if (attempt > 0) {
            const auto& prev = out.attempts.back();
            auto bindings = request.bindings;
            bindings["code"] = prev.code.code;
            bindings["error"] = prev.exec.stderr_text;
            prompt = prev.prompt;
            prompt.push_back({Role::Assistant, prev.response});
            prompt.push_back({Role::User, request.repair_template->substitute(bindings)});
        }

        const CallKey key{request.task_id, request.approach, attempt == 0 ? Stage::Generation : Stage::Repair,
                          attempt};
        AttemptRecord rec;
        rec.attempt_index = attempt;
        rec.prompt = prompt;
        try {
            rec.response = backend.complete(prompt, key);
            rec.code = extract_code(rec.response);
        } catch (const EmptyResponse&) {
            out.backend_error = "empty response for " + key.str();
            break;
        } catch (const BackendError& e) {
            out.backend_error = e.what();
            break;
        }
        rec.exec = sandbox.execute(rec.code.code, request.tests_for_loop, config.per_exec_timeout);
        const bool again = repair_triggered(config.repair_on, rec.exec.status);
        out.attempts.push_back(std::move(rec));
        if (!again) break;
    }
    return out;
}

} // namespace bidhi
