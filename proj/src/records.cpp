#include "visvar/records.hpp"

#include <set>

#include "visvar/digest.hpp"
#include "visvar/errors.hpp"
#include "visvar/text.hpp"

namespace visvar {

namespace {

template <typename T>
T enum_from(const std::string& s, std::initializer_list<std::pair<const char*, T>> table,
            const char* what) {
    for (const auto& [name, value] : table)
        if (s == name) return value;
    throw StoreError(std::string("unknown ") + what + " value: " + s);
}

// Splits a parsed object into known-field extraction plus an `extra` object
// holding everything unrecognized, so rewrites preserve unknown fields.
nlohmann::json take_extra(const nlohmann::json& j, std::initializer_list<const char*> known) {
    nlohmann::json extra = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool is_known = false;
        for (const char* k : known)
            if (it.key() == k) {
                is_known = true;
                break;
            }
        if (!is_known) extra[it.key()] = it.value();
    }
    return extra;
}

void put_optional(nlohmann::json& j, const char* key, const std::optional<std::string>& v) {
    if (v) j[key] = *v;
}

std::optional<std::string> get_optional_str(const nlohmann::json& j, const char* key) {
    if (j.contains(key) && !j[key].is_null()) return j[key].get<std::string>();
    return std::nullopt;
}

}  // namespace

std::string to_string(ImageKind k) { return k == ImageKind::original ? "original" : "variation"; }

std::string to_string(ImageStatus s) {
    switch (s) {
        case ImageStatus::pending: return "pending";
        case ImageStatus::active: return "active";
        case ImageStatus::excluded: return "excluded";
    }
    return "pending";
}

std::string to_string(Decision d) {
    switch (d) {
        case Decision::pending: return "pending";
        case Decision::kept: return "kept";
        case Decision::discarded: return "discarded";
        case Decision::failed: return "failed";
    }
    return "pending";
}

std::string to_string(QaOrigin o) {
    return o == QaOrigin::generated ? "generated" : "cross_applied";
}

std::string to_string(QaStatus s) {
    switch (s) {
        case QaStatus::pending: return "pending";
        case QaStatus::retained: return "retained";
        case QaStatus::discarded: return "discarded";
    }
    return "pending";
}

std::string to_string(Vote v) {
    switch (v) {
        case Vote::yes: return "yes";
        case Vote::no: return "no";
        case Vote::abstain: return "abstain";
    }
    return "abstain";
}

// ---------------------------------------------------------------- ImageRecord

nlohmann::json ImageRecord::to_json() const {
    nlohmann::json j = extra;
    j["schema"] = kStoreSchemaVersion;
    j["type"] = "image";
    j["id"] = id;
    j["uri"] = uri;
    j["kind"] = to_string(kind);
    put_optional(j, "parent_id", parent_id);
    j["caption"] = caption;
    j["tags"] = tags;
    put_optional(j, "mask_uri", mask_uri);
    j["status"] = to_string(status);
    put_optional(j, "note", note);
    return j;
}

ImageRecord ImageRecord::from_json(const nlohmann::json& j) {
    ImageRecord r;
    r.id = j.at("id").get<std::string>();
    r.uri = j.at("uri").get<std::string>();
    r.kind = enum_from<ImageKind>(j.at("kind").get<std::string>(),
                                  {{"original", ImageKind::original},
                                   {"variation", ImageKind::variation}},
                                  "image kind");
    r.parent_id = get_optional_str(j, "parent_id");
    r.caption = j.value("caption", "");
    if (j.contains("tags")) r.tags = j["tags"].get<std::vector<std::string>>();
    r.mask_uri = get_optional_str(j, "mask_uri");
    r.status = enum_from<ImageStatus>(j.value("status", "pending"),
                                      {{"pending", ImageStatus::pending},
                                       {"active", ImageStatus::active},
                                       {"excluded", ImageStatus::excluded}},
                                      "image status");
    r.note = get_optional_str(j, "note");
    r.extra = take_extra(j, {"schema", "type", "id", "uri", "kind", "parent_id", "caption", "tags",
                             "mask_uri", "status", "note"});
    return r;
}

void ImageRecord::validate() const {
    if (id.empty()) throw InvariantError("image.id", "id must be non-empty");
    if (uri.empty()) throw InvariantError("image.uri", "uri must be non-empty");
    if (kind == ImageKind::variation && !parent_id)
        throw InvariantError("image.variation_parent",
                             "kind=variation requires parent_id (record " + id + ")");
    if (kind == ImageKind::original && parent_id)
        throw InvariantError("image.original_no_parent",
                             "kind=original must not carry parent_id (record " + id + ")");
}

// --------------------------------------------------------- VariationCandidate

nlohmann::json VariationCandidate::to_json() const {
    nlohmann::json j = extra;
    j["schema"] = kStoreSchemaVersion;
    j["type"] = "candidate";
    j["id"] = id;
    j["parent_id"] = parent_id;
    j["edited_caption"] = edited_caption;
    j["target_word"] = target_word;
    j["replacement_phrase"] = replacement_phrase;
    put_optional(j, "image_uri", image_uri);
    if (vqa_score) j["vqa_score"] = *vqa_score;
    j["decision"] = to_string(decision);
    j["gate_threshold"] = gate_threshold;
    put_optional(j, "note", note);
    return j;
}

VariationCandidate VariationCandidate::from_json(const nlohmann::json& j) {
    VariationCandidate c;
    c.id = j.at("id").get<std::string>();
    c.parent_id = j.at("parent_id").get<std::string>();
    c.edited_caption = j.at("edited_caption").get<std::string>();
    c.target_word = j.value("target_word", "");
    c.replacement_phrase = j.value("replacement_phrase", "");
    c.image_uri = get_optional_str(j, "image_uri");
    if (j.contains("vqa_score") && !j["vqa_score"].is_null())
        c.vqa_score = j["vqa_score"].get<double>();
    c.decision = enum_from<Decision>(j.value("decision", "pending"),
                                     {{"pending", Decision::pending},
                                      {"kept", Decision::kept},
                                      {"discarded", Decision::discarded},
                                      {"failed", Decision::failed}},
                                     "candidate decision");
    c.gate_threshold = j.value("gate_threshold", 0.6);
    c.note = get_optional_str(j, "note");
    c.extra = take_extra(j, {"schema", "type", "id", "parent_id", "edited_caption", "target_word",
                             "replacement_phrase", "image_uri", "vqa_score", "decision",
                             "gate_threshold", "note"});
    return c;
}

void VariationCandidate::validate() const {
    if (id.empty()) throw InvariantError("candidate.id", "id must be non-empty");
    if (parent_id.empty()) throw InvariantError("candidate.parent_id", "parent_id must be set");
    if (edited_caption.empty())
        throw InvariantError("candidate.edited_caption", "edited caption must be non-empty");
    if (vqa_score && (*vqa_score < 0.0 || *vqa_score > 1.0))
        throw InvariantError("candidate.vqa_score_range",
                             "vqa_score outside [0,1] on record " + id);
    if (decision == Decision::kept) {
        if (!vqa_score)
            throw InvariantError("candidate.kept_requires_score",
                                 "decision=kept without vqa_score on record " + id);
        if (*vqa_score < gate_threshold)
            throw InvariantError("candidate.kept_below_threshold",
                                 "decision=kept with score below threshold on record " + id);
    }
}

// -------------------------------------------------------------------- QARecord

nlohmann::json QARecord::to_json() const {
    nlohmann::json j = extra;
    j["schema"] = kStoreSchemaVersion;
    j["type"] = "qa";
    j["id"] = id;
    j["image_id"] = image_id;
    j["question"] = question;
    j["answer"] = answer;
    j["origin"] = to_string(origin);
    put_optional(j, "source_image_id", source_image_id);
    j["ordinal"] = ordinal;
    nlohmann::json vs = nlohmann::json::array();
    for (const auto& v : verdicts)
        vs.push_back({{"expert_id", v.expert_id}, {"vote", to_string(v.vote)}});
    j["verdicts"] = vs;
    j["status"] = to_string(status);
    put_optional(j, "note", note);
    return j;
}

QARecord QARecord::from_json(const nlohmann::json& j) {
    QARecord r;
    r.id = j.at("id").get<std::string>();
    r.image_id = j.at("image_id").get<std::string>();
    r.question = j.at("question").get<std::string>();
    r.answer = j.value("answer", "");
    r.origin = enum_from<QaOrigin>(j.value("origin", "generated"),
                                   {{"generated", QaOrigin::generated},
                                    {"cross_applied", QaOrigin::cross_applied}},
                                   "qa origin");
    r.source_image_id = get_optional_str(j, "source_image_id");
    r.ordinal = j.value("ordinal", 0);
    if (j.contains("verdicts")) {
        for (const auto& v : j["verdicts"]) {
            Verdict verdict;
            verdict.expert_id = v.at("expert_id").get<std::string>();
            verdict.vote = enum_from<Vote>(
                v.at("vote").get<std::string>(),
                {{"yes", Vote::yes}, {"no", Vote::no}, {"abstain", Vote::abstain}}, "vote");
            r.verdicts.push_back(std::move(verdict));
        }
    }
    r.status = enum_from<QaStatus>(j.value("status", "pending"),
                                   {{"pending", QaStatus::pending},
                                    {"retained", QaStatus::retained},
                                    {"discarded", QaStatus::discarded}},
                                   "qa status");
    r.note = get_optional_str(j, "note");
    r.extra = take_extra(j, {"schema", "type", "id", "image_id", "question", "answer", "origin",
                             "source_image_id", "ordinal", "verdicts", "status", "note"});
    return r;
}

int QARecord::yes_count() const {
    int n = 0;
    for (const auto& v : verdicts)
        if (v.vote == Vote::yes) ++n;
    return n;
}

void QARecord::validate() const {
    if (id.empty()) throw InvariantError("qa.id", "id must be non-empty");
    if (image_id.empty()) throw InvariantError("qa.image_id", "image_id must be set");
    if (question.empty()) throw InvariantError("qa.question", "question must be non-empty");
    std::set<std::string> seen;
    for (const auto& v : verdicts) {
        if (!seen.insert(v.expert_id).second)
            throw InvariantError("qa.duplicate_expert",
                                 "duplicate expert_id '" + v.expert_id + "' on record " + id);
    }
    if (status == QaStatus::retained && yes_count() < 2)
        throw InvariantError("qa.retained_requires_two_yes",
                             "status=retained with fewer than 2 yes votes on record " + id);
    if (origin == QaOrigin::cross_applied && !source_image_id)
        throw InvariantError("qa.cross_applied_source",
                             "origin=cross_applied requires source_image_id on record " + id);
}

// ----------------------------------------------------------------- record ids

std::string original_image_id(const std::string& content_digest_hex) {
    return sha256_hex("image|original|" + content_digest_hex);
}

std::string variation_candidate_id(const std::string& parent_image_id,
                                   const std::string& edited_caption) {
    return sha256_hex("candidate|" + parent_image_id + "|" + text::normalize_ws(edited_caption));
}

std::string variation_image_id(const std::string& candidate_id) {
    return sha256_hex("image|variation|" + candidate_id);
}

std::string qa_record_id(const std::string& image_id, QaOrigin origin,
                         const std::string& question) {
    return sha256_hex("qa|" + image_id + "|" + to_string(origin) + "|" +
                      text::normalize_ws(question));
}

}  // namespace visvar
