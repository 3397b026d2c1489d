#include "visvar/log.hpp"

#include <fstream>
#include <iostream>
#include <mutex>

#include <nlohmann/json.hpp>

namespace visvar::log {

namespace {
std::mutex g_mutex;
Level g_level = Level::info;
std::ofstream g_file;

const char* level_tag(Level l) {
    switch (l) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
    }
    return "info";
}

void emit(Level l, const std::string& msg) {
    if (l < g_level) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    std::cerr << "[" << level_tag(l) << "] " << msg << "\n";
    if (g_file.is_open()) {
        g_file << nlohmann::json{{"level", level_tag(l)}, {"msg", msg}}.dump() << "\n";
        g_file.flush();
    }
}
}  // namespace

void set_level(Level level) { g_level = level; }

void open_file(const std::filesystem::path& path) {
    std::lock_guard<std::mutex> lock(g_mutex);
    std::filesystem::create_directories(path.parent_path());
    g_file.open(path, std::ios::app);
}

void close_file() {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (g_file.is_open()) g_file.close();
}

void debug(const std::string& msg) { emit(Level::debug, msg); }
void info(const std::string& msg) { emit(Level::info, msg); }
void warn(const std::string& msg) { emit(Level::warn, msg); }
void error(const std::string& msg) { emit(Level::error, msg); }

void task_line(const nlohmann::json& fields) {
    std::lock_guard<std::mutex> lock(g_mutex);
    if (g_level <= Level::info) {
        std::cerr << "[task] " << fields.value("stage", "") << "/"
                  << fields.value("task", "").substr(0, 12) << " "
                  << fields.value("outcome", "") << " " << fields.value("duration_ms", 0)
                  << "ms\n";
    }
    if (g_file.is_open()) {
        g_file << fields.dump() << "\n";
        g_file.flush();
    }
}

}  // namespace visvar::log
