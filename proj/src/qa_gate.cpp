#include "visvar/qa_gate.hpp"

#include <set>

#include "visvar/errors.hpp"
#include "visvar/text.hpp"

namespace visvar::qagate {

void PanelConfig::validate() const {
    const int n = static_cast<int>(experts.size());
    if (n < 2) throw ConfigError("panel.experts must list at least 2 experts");
    const int majority = (n + 1) / 2;
    if (retain_min_yes < majority || retain_min_yes > n)
        throw ConfigError("panel.retain_min_yes must be in [" + std::to_string(majority) + "," +
                          std::to_string(n) + "]");
    std::set<std::string> names;
    for (size_t i = 0; i < experts.size(); ++i) {
        experts[i].validate("panel.experts[" + std::to_string(i) + "]");
        if (experts[i].role != backends::Role::expert_judge)
            throw ConfigError("panel.experts[" + std::to_string(i) +
                              "] must have role expert_judge");
        if (!names.insert(experts[i].model_name).second)
            throw ConfigError("panel.experts contains duplicate model name '" +
                              experts[i].model_name + "'");
    }
}

backends::ChatPrompt build_verdict_prompt(const std::string& question, const std::string& answer) {
    if (text::normalize_ws(question).empty())
        throw PreconditionError("verdict prompt: question is empty");
    if (text::normalize_ws(answer).empty())
        throw PreconditionError("verdict prompt: answer is empty");
    backends::ChatPrompt p;
    p.system = "You are an assistant that helps to verify the factuality of the answer";
    static const char* kBody =
        "Verify whether the 'answer' in the following question-answer pairs is correct based on "
        "the image.\n"
        "If the answer is correct, output 'yes';\n"
        "If the answer is incorrect, output 'no'.\n"
        "\n"
        "Example:\n"
        "Question:\n"
        "Is the toy alligator holding a toothbrush?\n"
        "Answer:\n"
        "Yes, the toy alligator is holding a toothbrush.\n"
        "Output:\n"
        "Yes\n"
        "\n"
        "Input:\n"
        "Question:\n";
    p.user = std::string(kBody) + question + "\nAnswer:\n" + answer + "\n";
    return p;
}

TallyDecision tally(const std::vector<Verdict>& verdicts, const PanelConfig& cfg) {
    if (verdicts.size() != cfg.experts.size())
        throw PreconditionError("tally: expected one verdict per configured expert (" +
                                std::to_string(cfg.experts.size()) + "), got " +
                                std::to_string(verdicts.size()));
    std::set<std::string> seen;
    int yes = 0;
    for (const auto& v : verdicts) {
        if (!seen.insert(v.expert_id).second)
            throw PreconditionError("tally: duplicate expert_id '" + v.expert_id + "'");
        if (v.vote == Vote::yes) ++yes;
    }
    return yes >= cfg.retain_min_yes ? TallyDecision::retained : TallyDecision::discarded;
}

}  // namespace visvar::qagate
