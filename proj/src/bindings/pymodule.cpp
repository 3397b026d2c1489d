// Python bindings for the pipeline's core operations: prompt builders,
// parsers, the edit validator, the score gate, the expert-vote tally, and
// the POPE metrics.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "visvar/digest.hpp"
#include "visvar/eval.hpp"
#include "visvar/instruction.hpp"
#include "visvar/qa_gate.hpp"
#include "visvar/records.hpp"
#include "visvar/report.hpp"
#include "visvar/text.hpp"
#include "visvar/variation.hpp"

namespace py = pybind11;
using namespace visvar;

namespace {

qagate::PanelConfig panel_of(int experts, int retain_min_yes) {
    qagate::PanelConfig cfg;
    for (int i = 0; i < experts; ++i) {
        backends::BackendProfile p;
        p.role = backends::Role::expert_judge;
        p.endpoint = "mock:";
        p.model_name = "expert-" + std::to_string(i);
        cfg.experts.push_back(std::move(p));
    }
    cfg.retain_min_yes = retain_min_yes;
    cfg.validate();
    return cfg;
}

Vote vote_of(const std::string& s) {
    if (s == "yes") return Vote::yes;
    if (s == "no") return Vote::no;
    if (s == "abstain") return Vote::abstain;
    throw py::value_error("vote must be yes|no|abstain");
}

py::dict result_dict(const eval::EvalResult& r) {
    py::dict d;
    d["tp"] = r.counts.tp;
    d["fp"] = r.counts.fp;
    d["tn"] = r.counts.tn;
    d["fn"] = r.counts.fn;
    d["accuracy"] = r.accuracy;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f1"] = r.f1;
    d["unparseable"] = r.unparseable_count;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "core operations of the visvar pipeline";

    m.def("content_digest", [](py::bytes b) { return sha256_hex(std::string(b)); },
          "sha-256 hex digest of raw bytes");
    m.def("normalize_ws", [](const std::string& s) { return text::normalize_ws(s); },
          "trim and collapse whitespace runs");
    m.def("round_half_up", &text::round_half_up);

    m.def(
        "build_edit_prompt",
        [](const std::string& caption, const std::string& target, int variants) {
            return variation::build_edit_prompt({caption, target, variants});
        },
        py::arg("caption"), py::arg("target_word"), py::arg("variant_count") = 4);
    m.def(
        "parse_variants",
        [](const std::string& output, int expected) {
            auto parsed = variation::parse_variants(output, expected);
            return py::make_tuple(parsed.captions, parsed.short_count);
        },
        py::arg("llm_output"), py::arg("expected") = 4,
        "returns (captions, short_count_flag)");
    m.def("validate_edit",
          [](const std::string& original, const std::string& variant) -> py::object {
              auto spans = variation::validate_edit(original, variant);
              if (!spans) return py::none();
              return py::make_tuple(spans->target_span, spans->replacement_span);
          },
          "single-span word diff; returns (target, replacement) or None");
    m.def(
        "vqascore_question",
        [](const std::string& caption, const std::string& tmpl) {
            variation::GateConfig cfg;
            if (!tmpl.empty()) cfg.question_template = tmpl;
            return variation::vqascore_question(caption, cfg);
        },
        py::arg("caption"), py::arg("question_template") = "");
    m.def(
        "gate",
        [](double score, double threshold) {
            variation::GateConfig cfg;
            cfg.threshold = threshold;
            return variation::gate(score, cfg) == variation::GateDecision::kept;
        },
        py::arg("score"), py::arg("threshold") = 0.6, "True when kept");

    m.def(
        "build_question_prompt",
        [](const std::string& description, const std::vector<std::string>& tags) {
            auto p = instruction::build_question_prompt({"", description, tags});
            return py::make_tuple(p.system, p.user);
        },
        "returns (system_message, user_prompt)");
    m.def("parse_questions", &instruction::parse_questions, py::arg("llm_output"),
          py::arg("max_questions") = 7);
    m.def(
        "select_cross_questions",
        [](const std::vector<std::string>& questions, double fraction, std::uint64_t seed) {
            return instruction::select_cross_questions(questions, {fraction, seed});
        },
        py::arg("questions"), py::arg("fraction") = 0.5, py::arg("seed") = 0);

    m.def("build_verdict_prompt",
          [](const std::string& question, const std::string& answer) {
              auto p = qagate::build_verdict_prompt(question, answer);
              return py::make_tuple(p.system, p.user);
          });
    m.def(
        "tally",
        [](const std::vector<std::string>& votes, int retain_min_yes) {
            std::vector<Verdict> verdicts;
            for (size_t i = 0; i < votes.size(); ++i)
                verdicts.push_back({"expert-" + std::to_string(i), vote_of(votes[i])});
            auto cfg = panel_of(static_cast<int>(votes.size()), retain_min_yes);
            return qagate::tally(verdicts, cfg) == qagate::TallyDecision::retained;
        },
        py::arg("votes"), py::arg("retain_min_yes") = 2,
        "votes are yes|no|abstain strings; True when retained");
    m.def("parse_vote", [](const std::string& reply) {
        return to_string(backends::parse_vote(reply));
    });

    m.def("normalize_answer", [](const std::string& answer) {
        switch (eval::normalize_answer(answer)) {
            case eval::Norm::yes: return "yes";
            case eval::Norm::no: return "no";
            default: return "unparseable";
        }
    });
    m.def(
        "metrics_from_counts",
        [](long tp, long fp, long tn, long fn) {
            return result_dict(eval::EvalResult::from_counts({tp, fp, tn, fn}));
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
    m.def("score_histogram", &report::score_histogram, py::arg("scores"),
          "20 bins of width 0.05 over [0,1]");
}
