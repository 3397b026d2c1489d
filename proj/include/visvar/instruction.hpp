#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace visvar::instruction {

// Detailed description plus detector tags for one image. The description
// comes from an LVLM and may well contain hallucinations; that is what the
// question generator probes.
struct DescriptionBundle {
    std::string image_id;
    std::string description;
    std::vector<std::string> detected_tags;
};

struct CrossApplyConfig {
    double fraction = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SystemPrompt {
    std::string system;
    std::string user;
};

// Question-generation prompt: system message, instruction block, the zebra
// few-shot example, then the sentence and entries slots.
SystemPrompt build_question_prompt(const DescriptionBundle& bundle);

// Lines stripped of the optional leading '&' marker; empty lines dropped;
// truncated to `max_questions`. Questions over 20 words are kept but
// flagged with a warning (the length bound is a prompt instruction, not a
// hard filter).
std::vector<std::string> parse_questions(const std::string& llm_output, int max_questions = 7);

// Deterministic seeded sample of round_half_up(fraction * n) questions,
// preserving original order.
std::vector<std::string> select_cross_questions(const std::vector<std::string>& parent_questions,
                                                const CrossApplyConfig& cfg);

}  // namespace visvar::instruction
