#include "visvar/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>

#include "visvar/digest.hpp"
#include "visvar/errors.hpp"
#include "visvar/records.hpp"
#include "visvar/util.hpp"

namespace visvar {

void validate_record_json(const nlohmann::json& record) {
    if (!record.is_object()) throw StoreError("record line is not a JSON object");
    if (!record.contains("schema"))
        throw StoreError("record missing mandatory schema version field");
    if (record["schema"].get<int>() != kStoreSchemaVersion)
        throw StoreError("unsupported record schema version " + record["schema"].dump());
    const std::string type = record.value("type", "");
    if (type == "image") {
        ImageRecord::from_json(record).validate();
    } else if (type == "candidate") {
        VariationCandidate::from_json(record).validate();
    } else if (type == "qa") {
        QARecord::from_json(record).validate();
    } else {
        throw StoreError("unknown record type: '" + type + "'");
    }
}

RecordStore::RecordStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    load();
    fd_ = ::open(records_path().c_str(), O_CREAT | O_WRONLY | O_APPEND, 0644);
    if (fd_ < 0) throw StoreError("cannot open store for append: " + records_path().string());
}

RecordStore::~RecordStore() {
    if (fd_ >= 0) {
        if (dirty_) ::fsync(fd_);
        ::close(fd_);
    }
}

void RecordStore::load() {
    std::ifstream in(records_path(), std::ios::binary);
    if (!in) return;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw StoreError("corrupt store line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("schema") || !j.contains("id"))
            throw StoreError("corrupt store line " + std::to_string(lineno) +
                             ": missing schema or id");
        versions_.push_back(j);
        index_[j["id"].get<std::string>()] = versions_.size() - 1;
    }
}

void RecordStore::write_line(const nlohmann::json& record) {
    std::string line = record.dump();
    line.push_back('\n');
    size_t off = 0;
    while (off < line.size()) {
        ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
        if (n < 0) throw StoreError("store append failed");
        off += static_cast<size_t>(n);
    }
    dirty_ = true;
    versions_.push_back(record);
    index_[record["id"].get<std::string>()] = versions_.size() - 1;
    if (!in_batch_) flush();
}

void RecordStore::flush() {
    if (!dirty_) return;
    ::fsync(fd_);
    dirty_ = false;
    durable_event();
}

void RecordStore::begin_batch() { in_batch_ = true; }

void RecordStore::commit_batch() {
    in_batch_ = false;
    flush();
}

std::string RecordStore::append_new(const nlohmann::json& record) {
    validate_record_json(record);
    const std::string id = record.at("id").get<std::string>();
    auto it = index_.find(id);
    if (it != index_.end()) {
        if (versions_[it->second] == record) return id;  // idempotent replay
        throw StoreError("duplicate record id with differing content: " + id);
    }
    write_line(record);
    return id;
}

void RecordStore::append_update(const nlohmann::json& record) {
    validate_record_json(record);
    const std::string id = record.at("id").get<std::string>();
    auto it = index_.find(id);
    if (it == index_.end()) throw StoreError("update for unknown record id: " + id);
    if (versions_[it->second] == record) return;
    write_line(record);
}

bool RecordStore::contains(const std::string& id) const { return index_.count(id) > 0; }

const nlohmann::json& RecordStore::current(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw StoreError("unknown record id: " + id);
    return versions_[it->second];
}

std::vector<nlohmann::json> RecordStore::fold() const {
    std::vector<nlohmann::json> out;
    std::map<std::string, size_t> pos;  // id -> index in `out`
    for (const auto& v : versions_) {
        const std::string id = v["id"].get<std::string>();
        auto it = pos.find(id);
        if (it == pos.end()) {
            pos[id] = out.size();
            out.push_back(v);
        } else {
            out[it->second] = v;
        }
    }
    return out;
}

std::string RecordStore::put_blob(const std::string& subdir, std::string_view bytes,
                                  const std::string& ext) {
    const std::string digest = sha256_hex(bytes);
    const std::string uri = subdir + "/" + digest + "." + ext;
    const std::filesystem::path path = root_ / uri;
    if (!std::filesystem::exists(path)) {
        // Content-addressed, so concurrent writers of the same digest are
        // harmless; the atomic rename keeps partial files invisible.
        std::filesystem::create_directories(path.parent_path());
        std::filesystem::path tmp = path;
        tmp += "." + std::to_string(::getpid()) + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out) throw StoreError("blob write failed: " + tmp.string());
        }
        std::filesystem::rename(tmp, path);
    }
    return uri;
}

std::string RecordStore::read_blob(const std::string& uri) const {
    return read_file(root_ / uri);
}

bool RecordStore::has_blob(const std::string& uri) const {
    return std::filesystem::exists(root_ / uri);
}

}  // namespace visvar
