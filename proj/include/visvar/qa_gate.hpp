#pragma once

#include <string>
#include <vector>

#include "visvar/backends.hpp"
#include "visvar/records.hpp"

namespace visvar::qagate {

struct PanelConfig {
    std::vector<backends::BackendProfile> experts;  // role expert_judge
    int retain_min_yes = 2;

    void validate() const;  // throws ConfigError
};

// Verdict prompt: system message, instruction block, the alligator few-shot
// example, then the question/answer slots.
backends::ChatPrompt build_verdict_prompt(const std::string& question, const std::string& answer);

enum class TallyDecision { retained, discarded };

// Retain iff the absolute yes-count reaches retain_min_yes. Abstains count
// as neither yes nor no, so an unverified answer fails closed.
TallyDecision tally(const std::vector<Verdict>& verdicts, const PanelConfig& cfg);

}  // namespace visvar::qagate
