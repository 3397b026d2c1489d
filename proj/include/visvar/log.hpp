#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace visvar::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

void set_level(Level level);
// Mirrors structured lines to a JSONL file; human lines keep going to stderr.
void open_file(const std::filesystem::path& path);
void close_file();

void debug(const std::string& msg);
void info(const std::string& msg);
void warn(const std::string& msg);
void error(const std::string& msg);

// One structured line per pipeline task: stage, task_key, duration, attempts,
// outcome, plus whatever extra fields the stage adds.
void task_line(const nlohmann::json& fields);

}  // namespace visvar::log
