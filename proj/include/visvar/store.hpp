#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace visvar {

// Append-only JSONL record store. One JSON object per line, schema version
// field mandatory. Updates append a new full version of the record under the
// same id; reads fold versions with last-writer-wins. Image and mask bytes
// live beside the store as content-addressed files.
//
// Single writer, many readers: the pipeline engine serializes all appends
// through one committer.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path root);
    ~RecordStore();

    RecordStore(const RecordStore&) = delete;
    RecordStore& operator=(const RecordStore&) = delete;

    // Appends a brand-new record after validating its type invariants.
    // A duplicate id is rejected, except when the incoming record is
    // byte-identical to the current version (idempotent replay after a
    // crash-interrupted commit). Returns the record id.
    std::string append_new(const nlohmann::json& record);

    // Appends a new version of an existing record. No-op when identical to
    // the current version, so replays and re-finalizes leave the file
    // untouched.
    void append_update(const nlohmann::json& record);

    // Group several appends into one durable flush (one fsync).
    void begin_batch();
    void commit_batch();

    bool contains(const std::string& id) const;
    const nlohmann::json& current(const std::string& id) const;

    // Last version per id, in first-append order.
    std::vector<nlohmann::json> fold() const;
    // Every stored version in append order.
    const std::vector<nlohmann::json>& all_versions() const { return versions_; }

    size_t record_count() const { return index_.size(); }

    // Content-addressed blob storage; subdir is "images" or "masks".
    // Returns the store-relative uri ("images/<digest>.<ext>").
    std::string put_blob(const std::string& subdir, std::string_view bytes,
                         const std::string& ext);
    std::string read_blob(const std::string& uri) const;
    bool has_blob(const std::string& uri) const;

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path records_path() const { return root_ / "records.jsonl"; }

private:
    void load();
    void write_line(const nlohmann::json& record);
    void flush();

    std::filesystem::path root_;
    int fd_ = -1;
    bool in_batch_ = false;
    bool dirty_ = false;
    std::vector<nlohmann::json> versions_;
    std::map<std::string, size_t> index_;  // id -> index of latest version
};

// Validates a raw record line against its type invariants; throws
// InvariantError / StoreError.
void validate_record_json(const nlohmann::json& record);

}  // namespace visvar
