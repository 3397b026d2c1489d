#include "visvar/variation.hpp"

#include <random>

#include "visvar/errors.hpp"
#include "visvar/text.hpp"

namespace visvar::variation {

void EditRequest::validate() const {
    if (text::normalize_ws(original_caption).empty())
        throw PreconditionError("edit request: caption must be non-empty");
    if (text::normalize_ws(target_word).empty())
        throw PreconditionError("edit request: target word must be non-empty");
    if (variant_count < 1)
        throw PreconditionError("edit request: variant_count must be positive");
    int n = text::count_whole_word(original_caption, target_word);
    if (n == 0)
        throw PreconditionError("edit request: target word '" + target_word +
                                "' does not occur in the caption");
    if (n > 1)
        throw PreconditionError("edit request: target word '" + target_word +
                                "' occurs " + std::to_string(n) +
                                " times in the caption; replacement would be ambiguous");
}

TargetStrategy target_strategy_from_string(const std::string& s) {
    if (s == "first_match") return TargetStrategy::first_match;
    if (s == "random_seeded") return TargetStrategy::random_seeded;
    if (s == "all_tags") return TargetStrategy::all_tags;
    throw ConfigError("unknown target strategy: '" + s + "'");
}

std::string to_string(TargetStrategy s) {
    switch (s) {
        case TargetStrategy::first_match: return "first_match";
        case TargetStrategy::random_seeded: return "random_seeded";
        case TargetStrategy::all_tags: return "all_tags";
    }
    return "first_match";
}

std::string build_edit_prompt(const EditRequest& req) {
    req.validate();
    static const char* kHeader =
        "Replace one word in the given list with more detailed and visually relevant "
        "alternatives, and put the enriched description to replace the object in the provided "
        "sentence. please notice that only replace one object.\n"
        "Return only the updated sentences, each separated by a new line.\n"
        "\n"
        "Example:\n"
        "Words:\n"
        "bird\n"
        "Sentence:\n"
        "A bird is sitting on a tree.\n"
        "Answer:\n"
        "A majestic eagle is sitting on a tree.\n"
        "A colorful parrot is sitting on a tree.\n"
        "A small sparrow is sitting on a tree.\n"
        "A large hawk is sitting on a tree.\n"
        "\n"
        "Input:\n"
        "Words:\n";
    return std::string(kHeader) + req.target_word + "\nSentence:\n" + req.original_caption + "\n";
}

ParsedVariants parse_variants(const std::string& llm_output, int expected) {
    ParsedVariants out;
    for (auto& line : text::split_lines(llm_output)) {
        if (static_cast<int>(out.captions.size()) >= expected) break;
        out.captions.push_back(text::normalize_ws(line));
    }
    out.short_count = static_cast<int>(out.captions.size()) < expected;
    return out;
}

namespace {

// Longest-common-subsequence diff over word tokens; returns the number of
// change hunks and fills the spans of the first replacement hunk.
struct DiffResult {
    int hunks = 0;
    bool first_is_replacement = false;
    EditSpans spans;
};

DiffResult word_diff(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
    for (size_t i = n; i-- > 0;)
        for (size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1
                                     : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    DiffResult result;
    size_t i = 0, j = 0;
    auto at_match = [&] { return i < n && j < m && a[i] == b[j]; };
    while (i < n || j < m) {
        if (at_match()) {
            ++i;
            ++j;
            continue;
        }
        // One change hunk: follow the optimal path until it reaches a match.
        std::vector<std::string> removed, added;
        while ((i < n || j < m) && !at_match()) {
            if (j == m || (i < n && lcs[i + 1][j] >= lcs[i][j + 1])) {
                removed.push_back(a[i]);
                ++i;
            } else {
                added.push_back(b[j]);
                ++j;
            }
        }
        ++result.hunks;
        if (result.hunks == 1) {
            result.first_is_replacement = !removed.empty() && !added.empty();
            result.spans.target_span = text::join(removed, " ");
            result.spans.replacement_span = text::join(added, " ");
        }
    }
    return result;
}

}  // namespace

std::optional<EditSpans> validate_edit(const std::string& original, const std::string& variant) {
    if (original.empty() || variant.empty())
        throw PreconditionError("validate_edit: captions must be non-empty");
    auto a = text::split_words(text::normalize_ws(original));
    auto b = text::split_words(text::normalize_ws(variant));
    DiffResult diff = word_diff(a, b);
    if (diff.hunks != 1 || !diff.first_is_replacement) return std::nullopt;
    return diff.spans;
}

std::string vqascore_question(const std::string& caption, const GateConfig& cfg) {
    std::string normalized = text::normalize_ws(caption);
    if (normalized.empty()) throw PreconditionError("vqascore question: caption is empty");
    static const std::string placeholder = "{caption}";
    size_t pos = cfg.question_template.find(placeholder);
    if (pos == std::string::npos)
        throw ConfigError("variation.question_template is missing the {caption} placeholder");
    std::string out = cfg.question_template;
    out.replace(pos, placeholder.size(), normalized);
    return out;
}

GateDecision gate(double score, const GateConfig& cfg) {
    if (score < 0.0 || score > 1.0)
        throw PreconditionError("gate: score " + std::to_string(score) + " outside [0,1]");
    return score >= cfg.threshold ? GateDecision::kept : GateDecision::discarded;
}

std::vector<std::string> choose_targets(const std::vector<std::string>& tags,
                                        const std::string& caption, TargetStrategy strategy,
                                        std::uint64_t seed) {
    std::vector<std::string> eligible;
    for (const auto& tag : tags)
        if (text::count_whole_word(caption, tag) == 1) eligible.push_back(tag);
    if (eligible.empty()) return {};
    switch (strategy) {
        case TargetStrategy::first_match: return {eligible.front()};
        case TargetStrategy::random_seeded: {
            std::mt19937_64 rng(seed);
            return {eligible[rng() % eligible.size()]};
        }
        case TargetStrategy::all_tags: return eligible;
    }
    return {eligible.front()};
}

}  // namespace visvar::variation
