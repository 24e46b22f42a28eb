#pragma once

#include <functional>
#include <string>

#include <json.hpp>

namespace pforest {

using json = nlohmann::json;

/// Calls fn(line_number, parsed_object) for every non-blank line of a JSONL
/// file. Line numbers are 1-based. Throws ValidationError naming file and
/// line on unreadable files, malformed JSON, or non-object lines.
void for_each_jsonl(const std::string& path,
                    const std::function<void(size_t, const json&)>& fn);

/// Whole-file helpers. Both throw ValidationError on I/O failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// FNV-1a 64-bit digest as 16 lowercase hex chars. Used for request digests,
/// artifact fingerprints, and run ids; stable across platforms.
std::string fnv1a64_hex(std::string_view bytes);

/// Fetches a required field of the given type, or throws ValidationError
/// mentioning `context` (typically "file:line").
std::string require_string(const json& obj, const char* key, const std::string& context);
}  // namespace pforest
