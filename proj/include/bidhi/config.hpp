#pragma once

#include "bidhi/backends.hpp"
#include "bidhi/records.hpp"
#include "bidhi/translate.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bidhi {

/// Everything `bidhi run` needs. Loaded from a JSON file; relative paths
/// resolve against the file's directory.
struct SuiteConfig {
    std::filesystem::path corpus;
    std::vector<BackendConfig> backends;
    std::vector<Approach> approaches{kAllApproaches.begin(), kAllApproaches.end()};
    /// Empty means the built-in templates.
    std::filesystem::path templates_dir;
    std::filesystem::path run_dir = "runs";
    std::string suite_id;
    int parallelism = 1;
    double exec_timeout = 10.0;
    int max_repairs = 5;
    int testgen_limit = 5;
    InfraMode infra_mode = InfraMode::CountAsIncorrect;
    std::optional<TranslatorConfig> translator_a;
    std::optional<TranslatorConfig> translator_b;
    std::filesystem::path translation_cache;
    std::string python = "python3";
    std::size_t max_processes = 0;
    std::size_t memory_limit_mb = 2048;
    bool score = true;
    bool keep_artifacts = true;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

SuiteConfig parse_suite_config(std::string_view json_text, const std::filesystem::path& base_dir);
SuiteConfig load_suite_config(const std::filesystem::path& path);

/// `[id=]endpoint`, e.g. `mock:fixtures/happy` or `big=https://host/v1/chat`.
/// Without an id, a preset id or the endpoint's last path component is used.
BackendConfig parse_backend_flag(std::string_view spec);

} // namespace bidhi
