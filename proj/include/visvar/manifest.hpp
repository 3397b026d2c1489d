#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace visvar {

class RecordStore;

enum class TaskState { done, failed };

struct ManifestEntry {
    std::string input_digest;
    std::vector<std::string> output_ids;
    TaskState state = TaskState::done;
    std::string reason;    // populated for failed entries
    int attempts = 1;      // across runs; a retried task increments it
};

// Durable per-stage ledger of completed tasks. A task key is "<stage>/<id>".
// An entry marked done guarantees its output records are in the store; a
// config digest change invalidates every entry.
struct PipelineManifest {
    std::string run_id;
    std::string config_digest;
    std::map<std::string, ManifestEntry> entries;

    static std::string task_key(const std::string& stage, const std::string& id) {
        return stage + "/" + id;
    }

    bool is_done(const std::string& stage, const std::string& id,
                 const std::string& input_digest) const;
    void mark_done(const std::string& stage, const std::string& id,
                   const std::string& input_digest, std::vector<std::string> output_ids);
    void mark_failed(const std::string& stage, const std::string& id,
                     const std::string& input_digest, const std::string& reason);

    // Ids owned by done entries; records outside this set are invisible to
    // readers (half-committed task output).
    std::set<std::string> visible_ids() const;

    // Every done entry must have all of its output ids present in the store.
    void verify_against(const RecordStore& store) const;

    nlohmann::json to_json() const;
    static PipelineManifest from_json(const nlohmann::json& j);

    void save(const std::filesystem::path& path) const;  // atomic write + rename
    static std::optional<PipelineManifest> load(const std::filesystem::path& path);
};

}  // namespace visvar
