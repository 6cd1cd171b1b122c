#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace bidhi {

std::string_view trim(std::string_view s) noexcept;

bool is_identifier(std::string_view s) noexcept;

/// True when `s`, after leading whitespace, starts with the keyword
/// `assert` as a whole token.
bool starts_with_assert(std::string_view s) noexcept;

/// Lowercase hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Escapes a value so it can be used as one path component.
std::string path_component(std::string_view raw);

/// `*` and `?` wildcards over the whole string.
bool glob_match(std::string_view pattern, std::string_view text) noexcept;

} // namespace bidhi
