#include "visvar/instruction.hpp"

#include <algorithm>
#include <random>

#include "visvar/errors.hpp"
#include "visvar/log.hpp"
#include "visvar/text.hpp"

namespace visvar::instruction {

void CrossApplyConfig::validate() const {
    if (fraction < 0.0 || fraction > 1.0)
        throw ConfigError("instruction.cross_fraction must be in [0,1]");
}

SystemPrompt build_question_prompt(const DescriptionBundle& bundle) {
    if (text::normalize_ws(bundle.description).empty())
        throw PreconditionError("question prompt: description is empty");
    if (bundle.detected_tags.empty())
        throw PreconditionError("question prompt: detected tag list is empty");
    SystemPrompt p;
    p.system =
        "You are a language assistant that helps to ask questions about a sentence and some "
        "entries.";
    static const char* kBody =
        "Given a caption and entries, you need to come up with seven questions based on the "
        "sentence and entries. These questions should help verify the factuality of the "
        "sentence.\n"
        "The questions may concern the existence and basic attributes of the entities, such as "
        "color, action, etc., as well as the quantity and positional relationship of the "
        "entities, When inquiring about positional relationships, ensure the question is clear.\n"
        "Keep the questions simple and no more than 20 words.\n"
        "When outputting, only one question should be given per line. Avoid repeating questions. "
        "For each line, first output &, then output the question.\n"
        "\n"
        "Example:\n"
        "Sentence:\n"
        "The image depicts a large herd of zebras grazing in a grassy field. The zebras are "
        "scattered throughout the field, with some closer to the foreground and others further "
        "in the background. The field is dotted with trees, providing a natural and serene "
        "setting for the zebras.\n"
        "Entries:\n"
        "zebra wheat\n"
        "Output:\n"
        "&How many zebras are in the herd?\n"
        "&What color is the field?\n"
        "&Are there trees in the field?\n"
        "&Are the zebra closer to the foreground or the background?\n"
        "\n"
        "Input:\n"
        "Sentence:\n";
    p.user = std::string(kBody) + bundle.description + "\nEntries:\n" +
             text::join(bundle.detected_tags, " ") + "\n";
    return p;
}

std::vector<std::string> parse_questions(const std::string& llm_output, int max_questions) {
    std::vector<std::string> questions;
    for (auto& raw : text::split_lines(llm_output)) {
        if (static_cast<int>(questions.size()) >= max_questions) break;
        std::string line = raw;
        if (!line.empty() && line[0] == '&') line.erase(0, 1);
        line = text::normalize_ws(line);
        if (line.empty()) continue;
        if (text::split_words(line).size() > 20)
            log::warn("generated question exceeds 20 words, keeping: " + line);
        questions.push_back(std::move(line));
    }
    return questions;
}

std::vector<std::string> select_cross_questions(const std::vector<std::string>& parent_questions,
                                                const CrossApplyConfig& cfg) {
    cfg.validate();
    const size_t n = parent_questions.size();
    const int k = std::clamp(text::round_half_up(cfg.fraction * static_cast<double>(n)), 0,
                             static_cast<int>(n));
    if (k == 0) return {};
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates over the index array, then restore original order.
    std::mt19937_64 rng(cfg.seed);
    for (size_t i = 0; i < static_cast<size_t>(k); ++i) {
        size_t j = i + static_cast<size_t>(rng() % (n - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<size_t> chosen(idx.begin(), idx.begin() + k);
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::string> out;
    out.reserve(chosen.size());
    for (size_t i : chosen) out.push_back(parent_questions[i]);
    return out;
}

}  // namespace visvar::instruction
