#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "visvar/backends.hpp"

namespace visvar::eval {

enum class PopeSetting { random, popular, adversarial };
std::string to_string(PopeSetting s);
PopeSetting pope_setting_from_string(const std::string& s);

// One balanced yes/no object-existence probe.
struct PopeItem {
    std::string image_uri;
    std::string question;
    bool label_yes = false;
    PopeSetting setting = PopeSetting::random;
};

enum class Norm { yes, no, unparseable };

// First alphabetic token, lowercased: "yes" / "no" / anything else.
Norm normalize_answer(std::string_view answer);

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

struct EvalResult {
    ConfusionCounts counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long unparseable_count = 0;

    // Closed forms with fail-low zero-denominator conventions:
    // precision = 0 when tp+fp = 0, recall = 0 when tp+fn = 0,
    // f1 = 0 when precision+recall = 0.
    static EvalResult from_counts(const ConfusionCounts& counts, long unparseable = 0);
};

struct ScoreReport {
    std::map<PopeSetting, EvalResult> per_setting;
    EvalResult overall_micro;   // counts summed across settings
    double macro_accuracy = 0.0;  // secondary: unweighted mean over settings
    double macro_f1 = 0.0;

    nlohmann::json to_json() const;
    std::string render_text() const;
};

// Scores answered items. Unparseable answers count as incorrect toward the
// opposite of the label (never dropped) and are tallied separately.
ScoreReport score(const std::vector<std::pair<PopeItem, std::string>>& answered);

// Native items file: one JSON object per line with
// {image_uri, question, label: "yes"|"no", setting}.
std::vector<PopeItem> load_pope_items(const std::filesystem::path& path);

// Converter for the public POPE release layout: lines of
// {question_id, image, text, label}; the setting comes from the caller
// (the release encodes it in the file name).
std::vector<PopeItem> convert_pope_release(const std::filesystem::path& path,
                                           PopeSetting setting);

struct PopeRunOptions {
    std::filesystem::path out_dir;      // transcript + results land here
    std::filesystem::path image_root;   // resolves relative image uris
    int workers = 4;
    double abort_failure_fraction = 0.10;
};

// Poses every item to the model endpoint, persists the full transcript,
// and scores the answers. Per-item failures are recorded as unparseable;
// more than abort_failure_fraction of failures aborts with a diagnostic.
ScoreReport run_pope_eval(const std::vector<PopeItem>& items, backends::BackendClient& model,
                          const PopeRunOptions& options);

}  // namespace visvar::eval
