#pragma once

#include "bidhi/backends.hpp"
#include "bidhi/dataset.hpp"

#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

namespace bidhi::testing {

inline std::filesystem::path fixtures_dir() {
    return BIDHI_FIXTURES_DIR;
}

inline std::filesystem::path templates_dir() {
    return BIDHI_TEMPLATES_DIR;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("bidhi-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

using Script = std::function<std::string(std::span<const ChatMessage>, const CallKey&)>;

/// Backend driven by a callback; keeps every request for inspection.
class ScriptedBackend final : public ChatBackend {
public:
    explicit ScriptedBackend(Script script, std::string id = "scripted")
        : ChatBackend(BackendConfig{.backend_id = std::move(id), .endpoint = "mock:scripted"}),
          script_(std::move(script)) {}

    std::vector<CallRecord> calls() const {
        std::lock_guard lock(mu_);
        return calls_;
    }
    std::size_t call_count() const {
        std::lock_guard lock(mu_);
        return calls_.size();
    }

private:
    std::string do_complete(std::span<const ChatMessage> messages, const CallKey& key) override {
        auto response = script_(messages, key);
        std::lock_guard lock(mu_);
        calls_.push_back(CallRecord{key, {messages.begin(), messages.end()}, response, 0.0});
        return response;
    }

    Script script_;
    mutable std::mutex mu_;
    std::vector<CallRecord> calls_;
};

inline std::string fenced(const std::string& code) {
    return "```python\n" + code + "\n```";
}

inline TaskRecord make_task(const std::string& id, const std::string& entry, std::string given,
                            std::vector<std::string> hidden, std::string instruction = "") {
    if (instruction.empty()) instruction = "Implement " + entry + " for task " + id + ".";
    return TaskRecord{id, std::move(instruction), entry, std::move(given), std::move(hidden)};
}


/// Task `S<i>`: entry point f<i> returns x * (i + 2).
inline TaskRecord synthetic_task(int i) {
    const auto n = std::to_string(i);
    const auto k = i + 2;
    std::string id = i < 10 ? "S0" + n : "S" + n;
    return TaskRecord{id, "Return the argument multiplied by " + std::to_string(k) + ".", "f" + n,
                      "assert f" + n + "(1) == " + std::to_string(k),
                      {"assert f" + n + "(2) == " + std::to_string(2 * k), "assert f" + n + "(-3) == " + std::to_string(-3 * k)}};
}

inline std::vector<TaskRecord> synthetic_corpus(int n) {
    std::vector<TaskRecord> out;
    for (int i = 0; i < n; ++i) out.push_back(synthetic_task(i));
    return out;
}

/// Deterministic answer for a synthetic task that depends only on the call
/// key: a mix of broken, wrong and correct first attempts, correct repairs.
inline std::string synthetic_response(const CallKey& key) {
    const int i = std::stoi(key.task_id.substr(1));
    const auto n = std::to_string(i);
    const auto k = std::to_string(i + 2);
    if (key.stage == Stage::TestGeneration) {
        // Eight candidates (one equal to the given test) plus one for another function.
        std::string out = "assert g(1) == 1\n";
        for (int x : {1, 0, 3, 4, 5, 6, 7, 8})
            out += "assert f" + n + "(" + std::to_string(x) + ") == " + std::to_string(x * (i + 2)) + "\n";
        return out;
    }
    if (key.stage == Stage::Repair) return fenced("def f" + n + "(x):\n    return x * " + k);
    unsigned h = 0;
    for (char c : key.task_id + "/" + key.approach) h = h * 31 + static_cast<unsigned char>(c);
    switch (h % 4) {
    case 0: return fenced("def f" + n + "(x:\n    return x");
    case 1: return fenced("def f" + n + "(x):\n    return x * " + k + " if x != -3 else 0");
    default: return "Sure.\n" + fenced("def f" + n + "(x):\n    return x * " + k);
    }
}

inline Script synthetic_script() {
    return [](std::span<const ChatMessage>, const CallKey& key) { return synthetic_response(key); };
}

} // namespace bidhi::testing
