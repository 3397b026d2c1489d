#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace visvar {

inline constexpr int kStoreSchemaVersion = 1;

enum class ImageKind { original, variation };
enum class ImageStatus { pending, active, excluded };
enum class Decision { pending, kept, discarded, failed };
enum class QaOrigin { generated, cross_applied };
enum class QaStatus { pending, retained, discarded };
enum class Vote { yes, no, abstain };

std::string to_string(ImageKind k);
std::string to_string(ImageStatus s);
std::string to_string(Decision d);
std::string to_string(QaOrigin o);
std::string to_string(QaStatus s);
std::string to_string(Vote v);

struct Verdict {
    std::string expert_id;
    Vote vote = Vote::abstain;
};

// An original or generated image with caption, tags, mask reference,
// lineage, and lifecycle status.
struct ImageRecord {
    std::string id;
    std::string uri;
    ImageKind kind = ImageKind::original;
    std::optional<std::string> parent_id;
    std::string caption;
    std::vector<std::string> tags;
    std::optional<std::string> mask_uri;
    ImageStatus status = ImageStatus::pending;
    std::optional<std::string> note;  // exclusion reason / stage flag
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    static ImageRecord from_json(const nlohmann::json& j);
    // Throws InvariantError naming the violated invariant.
    void validate() const;
};

// One edited caption plus the generated image, its alignment score, and the
// gate decision.
struct VariationCandidate {
    std::string id;
    std::string parent_id;
    std::string edited_caption;
    std::string target_word;
    std::string replacement_phrase;
    std::optional<std::string> image_uri;
    std::optional<double> vqa_score;
    Decision decision = Decision::pending;
    double gate_threshold = 0.6;  // threshold in force when gated
    std::optional<std::string> note;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    static VariationCandidate from_json(const nlohmann::json& j);
    void validate() const;
};

// A question/answer pair bound to an image, with expert verdicts and the
// retention decision.
struct QARecord {
    std::string id;
    std::string image_id;
    std::string question;
    std::string answer;
    QaOrigin origin = QaOrigin::generated;
    std::optional<std::string> source_image_id;  // parent image, for cross_applied
    int ordinal = 0;  // question position at generation time
    std::vector<Verdict> verdicts;
    QaStatus status = QaStatus::pending;
    std::optional<std::string> note;
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    static QARecord from_json(const nlohmann::json& j);
    void validate() const;

    int yes_count() const;
};

// Record id derivations. Ids are digests over lineage + stage + stable
// inputs so reruns regenerate identical ids.
std::string original_image_id(const std::string& content_digest_hex);
std::string variation_candidate_id(const std::string& parent_image_id,
                                   const std::string& edited_caption);
std::string variation_image_id(const std::string& candidate_id);
std::string qa_record_id(const std::string& image_id, QaOrigin origin,
                         const std::string& question);

}  // namespace visvar
