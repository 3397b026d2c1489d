#include "visvar/manifest.hpp"

#include "visvar/errors.hpp"
#include "visvar/store.hpp"
#include "visvar/util.hpp"

namespace visvar {

bool PipelineManifest::is_done(const std::string& stage, const std::string& id,
                               const std::string& input_digest) const {
    auto it = entries.find(task_key(stage, id));
    return it != entries.end() && it->second.state == TaskState::done &&
           it->second.input_digest == input_digest;
}

void PipelineManifest::mark_done(const std::string& stage, const std::string& id,
                                 const std::string& input_digest,
                                 std::vector<std::string> output_ids) {
    const std::string key = task_key(stage, id);
    auto it = entries.find(key);
    const int attempts = it == entries.end() ? 1 : it->second.attempts + 1;
    entries[key] = ManifestEntry{input_digest, std::move(output_ids), TaskState::done, "", attempts};
}

void PipelineManifest::mark_failed(const std::string& stage, const std::string& id,
                                   const std::string& input_digest, const std::string& reason) {
    const std::string key = task_key(stage, id);
    auto it = entries.find(key);
    const int attempts = it == entries.end() ? 1 : it->second.attempts + 1;
    entries[key] = ManifestEntry{input_digest, {}, TaskState::failed, reason, attempts};
}

std::set<std::string> PipelineManifest::visible_ids() const {
    std::set<std::string> ids;
    for (const auto& [key, entry] : entries) {
        if (entry.state != TaskState::done) continue;
        ids.insert(entry.output_ids.begin(), entry.output_ids.end());
    }
    return ids;
}

void PipelineManifest::verify_against(const RecordStore& store) const {
    for (const auto& [key, entry] : entries) {
        if (entry.state != TaskState::done) continue;
        for (const auto& id : entry.output_ids) {
            if (!store.contains(id))
                throw StoreError("manifest entry " + key + " is done but output record " + id +
                                 " is missing from the store");
        }
    }
}

nlohmann::json PipelineManifest::to_json() const {
    nlohmann::json es = nlohmann::json::object();
    for (const auto& [key, e] : entries) {
        nlohmann::json je = {{"input_digest", e.input_digest},
                             {"output_ids", e.output_ids},
                             {"state", e.state == TaskState::done ? "done" : "failed"},
                             {"attempts", e.attempts}};
        if (!e.reason.empty()) je["reason"] = e.reason;
        es[key] = std::move(je);
    }
    return {{"schema", 1}, {"run_id", run_id}, {"config_digest", config_digest}, {"entries", es}};
}

PipelineManifest PipelineManifest::from_json(const nlohmann::json& j) {
    PipelineManifest m;
    m.run_id = j.value("run_id", "");
    m.config_digest = j.value("config_digest", "");
    if (j.contains("entries")) {
        for (auto it = j["entries"].begin(); it != j["entries"].end(); ++it) {
            const auto& je = it.value();
            ManifestEntry e;
            e.input_digest = je.value("input_digest", "");
            if (je.contains("output_ids"))
                e.output_ids = je["output_ids"].get<std::vector<std::string>>();
            e.state = je.value("state", "done") == "done" ? TaskState::done : TaskState::failed;
            e.reason = je.value("reason", "");
            e.attempts = je.value("attempts", 1);
            m.entries[it.key()] = std::move(e);
        }
    }
    return m;
}

void PipelineManifest::save(const std::filesystem::path& path) const {
    write_file_atomic(path, to_json().dump(2) + "\n");
}

std::optional<PipelineManifest> PipelineManifest::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return std::nullopt;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw StoreError("corrupt manifest: " + std::string(e.what()));
    }
    return from_json(j);
}

}  // namespace visvar
