#include "visvar/eval.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "visvar/errors.hpp"
#include "visvar/log.hpp"
#include "visvar/text.hpp"
#include "visvar/util.hpp"

namespace visvar::eval {

std::string to_string(PopeSetting s) {
    switch (s) {
        case PopeSetting::random: return "random";
        case PopeSetting::popular: return "popular";
        case PopeSetting::adversarial: return "adversarial";
    }
    return "random";
}

PopeSetting pope_setting_from_string(const std::string& s) {
    if (s == "random") return PopeSetting::random;
    if (s == "popular") return PopeSetting::popular;
    if (s == "adversarial") return PopeSetting::adversarial;
    throw ConfigError("unknown POPE setting: '" + s + "' (expected random|popular|adversarial)");
}

Norm normalize_answer(std::string_view answer) {
    std::string token = text::first_alpha_token(answer);
    if (token == "yes") return Norm::yes;
    if (token == "no") return Norm::no;
    return Norm::unparseable;
}

EvalResult EvalResult::from_counts(const ConfusionCounts& counts, long unparseable) {
    EvalResult r;
    r.counts = counts;
    r.unparseable_count = unparseable;
    const long total = counts.total();
    r.accuracy = total > 0 ? static_cast<double>(counts.tp + counts.tn) / total : 0.0;
    r.precision =
        counts.tp + counts.fp > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fp) : 0.0;
    r.recall =
        counts.tp + counts.fn > 0 ? static_cast<double>(counts.tp) / (counts.tp + counts.fn) : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                      : 0.0;
    return r;
}

ScoreReport score(const std::vector<std::pair<PopeItem, std::string>>& answered) {
    if (answered.empty()) throw PreconditionError("score: empty item list");
    std::map<PopeSetting, ConfusionCounts> counts;
    std::map<PopeSetting, long> unparseable;
    for (const auto& [item, answer] : answered) {
        Norm norm = normalize_answer(answer);
        bool predicted_yes;
        if (norm == Norm::unparseable) {
            ++unparseable[item.setting];
            predicted_yes = !item.label_yes;  // counted as incorrect
        } else {
            predicted_yes = norm == Norm::yes;
        }
        ConfusionCounts& c = counts[item.setting];
        if (item.label_yes) {
            predicted_yes ? ++c.tp : ++c.fn;
        } else {
            predicted_yes ? ++c.fp : ++c.tn;
        }
    }
    ScoreReport report;
    ConfusionCounts micro;
    long micro_unparseable = 0;
    double acc_sum = 0.0, f1_sum = 0.0;
    for (const auto& [setting, c] : counts) {
        EvalResult r = EvalResult::from_counts(c, unparseable[setting]);
        acc_sum += r.accuracy;
        f1_sum += r.f1;
        micro.tp += c.tp;
        micro.fp += c.fp;
        micro.tn += c.tn;
        micro.fn += c.fn;
        micro_unparseable += r.unparseable_count;
        report.per_setting[setting] = r;
    }
    report.overall_micro = EvalResult::from_counts(micro, micro_unparseable);
    report.macro_accuracy = acc_sum / static_cast<double>(counts.size());
    report.macro_f1 = f1_sum / static_cast<double>(counts.size());
    return report;
}

namespace {
nlohmann::json result_json(const EvalResult& r) {
    return {{"tp", r.counts.tp},
            {"fp", r.counts.fp},
            {"tn", r.counts.tn},
            {"fn", r.counts.fn},
            {"total", r.counts.total()},
            {"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1", r.f1},
            {"unparseable", r.unparseable_count}};
}
}  // namespace

nlohmann::json ScoreReport::to_json() const {
    nlohmann::json settings = nlohmann::json::object();
    for (const auto& [setting, r] : per_setting) settings[to_string(setting)] = result_json(r);
    return {{"schema", 1},
            {"settings", settings},
            {"overall_micro", result_json(overall_micro)},
            {"macro", {{"accuracy", macro_accuracy}, {"f1", macro_f1}}}};
}

std::string ScoreReport::render_text() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "setting       total    acc     prec    recall  f1      unparseable\n";
    auto row = [&](const std::string& name, const EvalResult& r) {
        out << std::left << std::setw(13) << name << std::right << std::setw(6)
            << r.counts.total() << "  " << r.accuracy << "  " << r.precision << "  " << r.recall
            << "  " << r.f1 << "  " << std::setw(6) << r.unparseable_count << "\n";
    };
    for (const auto& [setting, r] : per_setting) row(to_string(setting), r);
    row("micro-avg", overall_micro);
    out << "macro-avg            " << macro_accuracy << "          " << macro_f1 << " (f1)\n";
    return out.str();
}

std::vector<PopeItem> load_pope_items(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open items file: " + path.string());
    std::vector<PopeItem> items;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::normalize_ws(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("items line " + std::to_string(lineno) + " is not JSON: " +
                              e.what());
        }
        PopeItem item;
        item.image_uri = j.at("image_uri").get<std::string>();
        item.question = j.at("question").get<std::string>();
        const std::string label = text::to_lower(j.at("label").get<std::string>());
        if (label != "yes" && label != "no")
            throw ConfigError("items line " + std::to_string(lineno) + ": label must be yes|no");
        item.label_yes = label == "yes";
        item.setting = pope_setting_from_string(j.at("setting").get<std::string>());
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<PopeItem> convert_pope_release(const std::filesystem::path& path,
                                           PopeSetting setting) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open POPE file: " + path.string());
    std::vector<PopeItem> items;
    std::string line;
    while (std::getline(in, line)) {
        if (text::normalize_ws(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        PopeItem item;
        item.image_uri = j.at("image").get<std::string>();
        item.question = j.at("text").get<std::string>();
        item.label_yes = text::to_lower(j.at("label").get<std::string>()) == "yes";
        item.setting = setting;
        items.push_back(std::move(item));
    }
    return items;
}

ScoreReport run_pope_eval(const std::vector<PopeItem>& items, backends::BackendClient& model,
                          const PopeRunOptions& options) {
    if (items.empty()) throw PreconditionError("run_pope_eval: empty item list");

    struct Transcript {
        std::string raw;
        bool failed = false;
    };
    std::vector<Transcript> transcripts(items.size());
    std::atomic<size_t> next{0};
    std::atomic<long> failures{0};
    const long failure_budget =
        static_cast<long>(options.abort_failure_fraction * static_cast<double>(items.size()));
    std::atomic<bool> aborted{false};

    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= items.size() || aborted.load()) return;
            const PopeItem& item = items[i];
            try {
                std::filesystem::path image_path = options.image_root.empty()
                                                       ? std::filesystem::path(item.image_uri)
                                                       : options.image_root / item.image_uri;
                std::string image = read_file(image_path);
                transcripts[i].raw = model.chat_about_image(
                    image, backends::ChatPrompt{"", item.question});
            } catch (const Error& e) {
                transcripts[i].failed = true;
                if (failures.fetch_add(1) + 1 > failure_budget) aborted.store(true);
                log::warn("pope item " + std::to_string(i) + " failed: " + e.what());
            }
        }
    };
    int thread_count = std::max(1, options.workers);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    if (aborted.load())
        throw TaskFailure("pope eval aborted: " + std::to_string(failures.load()) + " of " +
                          std::to_string(items.size()) + " items failed (>" +
                          std::to_string(options.abort_failure_fraction * 100.0) + "%)");

    std::vector<std::pair<PopeItem, std::string>> answered;
    answered.reserve(items.size());
    for (size_t i = 0; i < items.size(); ++i)
        answered.emplace_back(items[i], transcripts[i].failed ? "" : transcripts[i].raw);

    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        std::ofstream tr(options.out_dir / "transcript.jsonl");
        for (size_t i = 0; i < items.size(); ++i) {
            Norm norm = transcripts[i].failed ? Norm::unparseable
                                              : normalize_answer(transcripts[i].raw);
            tr << nlohmann::json{{"index", i},
                                 {"setting", to_string(items[i].setting)},
                                 {"image_uri", items[i].image_uri},
                                 {"question", items[i].question},
                                 {"label", items[i].label_yes ? "yes" : "no"},
                                 {"raw_answer", transcripts[i].raw},
                                 {"normalized", norm == Norm::yes  ? "yes"
                                                : norm == Norm::no ? "no"
                                                                   : "unparseable"},
                                 {"failed", transcripts[i].failed}}
                      .dump()
               << "\n";
        }
    }

    ScoreReport report = score(answered);
    if (!options.out_dir.empty()) {
        write_file_atomic(options.out_dir / "results.json", report.to_json().dump(2) + "\n");
        write_file_atomic(options.out_dir / "results.txt", report.render_text());
    }
    return report;
}

}  // namespace visvar::eval
