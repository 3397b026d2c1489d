#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace visvar::variation {

// Request to rewrite one caption by replacing a single target word.
struct EditRequest {
    std::string original_caption;
    std::string target_word;
    int variant_count = 4;

    void validate() const;  // throws PreconditionError
};

struct GateConfig {
    double threshold = 0.6;
    std::string question_template = R"(Does this figure show "{caption}"? Please answer yes or no.)";
};

enum class TargetStrategy { first_match, random_seeded, all_tags };
TargetStrategy target_strategy_from_string(const std::string& s);
std::string to_string(TargetStrategy s);

// Caption-edit prompt: instruction block, the bird few-shot example, then
// the word and sentence slots.
std::string build_edit_prompt(const EditRequest& req);

struct ParsedVariants {
    std::vector<std::string> captions;
    bool short_count = false;  // fewer lines than requested
};

// Non-empty lines, trimmed, truncated to `expected`. Zero lines is a task
// failure for the caller.
ParsedVariants parse_variants(const std::string& llm_output, int expected);

struct EditSpans {
    std::string target_span;
    std::string replacement_span;
};

// Word-level diff between original and variant. Valid only when the diff is
// exactly one contiguous replaced span with identical surroundings.
std::optional<EditSpans> validate_edit(const std::string& original, const std::string& variant);

// Fills the gate question template's {caption} placeholder.
std::string vqascore_question(const std::string& caption, const GateConfig& cfg);

enum class GateDecision { kept, discarded };

// Keep iff score >= threshold (boundary inclusive).
GateDecision gate(double score, const GateConfig& cfg);

// Target-word choice over the image's tags: the tag must occur exactly once
// as a whole word in the caption. Returns the chosen tags (one for
// first_match/random_seeded, possibly several for all_tags).
std::vector<std::string> choose_targets(const std::vector<std::string>& tags,
                                        const std::string& caption, TargetStrategy strategy,
                                        std::uint64_t seed);

}  // namespace visvar::variation
