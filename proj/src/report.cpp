#include "visvar/report.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "visvar/errors.hpp"
#include "visvar/records.hpp"

namespace visvar::report {

int bin_index(double score) {
    if (score < 0.0 || score > 1.0)
        throw PreconditionError("histogram: score outside [0,1]");
    int idx = static_cast<int>(score / kBinWidth);
    return std::min(idx, kHistogramBins - 1);
}

std::vector<long> score_histogram(const std::vector<double>& scores) {
    std::vector<long> bins(kHistogramBins, 0);
    for (double s : scores) ++bins[static_cast<size_t>(bin_index(s))];
    return bins;
}

nlohmann::json build_report(const std::vector<nlohmann::json>& records, double gate_threshold) {
    long originals_total = 0, originals_active = 0, originals_excluded = 0;
    long variations_active = 0;
    long candidates_total = 0, candidates_kept = 0, candidates_discarded = 0,
         candidates_failed = 0;
    long qa_total = 0, qa_generated = 0, qa_cross = 0;
    long qa_retained = 0, qa_discarded = 0, qa_pending = 0;
    std::vector<double> scores;

    for (const auto& j : records) {
        const std::string type = j.value("type", "");
        if (type == "image") {
            ImageRecord r = ImageRecord::from_json(j);
            if (r.kind == ImageKind::original) {
                ++originals_total;
                if (r.status == ImageStatus::active) ++originals_active;
                if (r.status == ImageStatus::excluded) ++originals_excluded;
            } else if (r.status == ImageStatus::active) {
                ++variations_active;
            }
        } else if (type == "candidate") {
            VariationCandidate c = VariationCandidate::from_json(j);
            ++candidates_total;
            if (c.decision == Decision::kept) ++candidates_kept;
            if (c.decision == Decision::discarded) ++candidates_discarded;
            if (c.decision == Decision::failed) ++candidates_failed;
            if (c.vqa_score) scores.push_back(*c.vqa_score);
        } else if (type == "qa") {
            QARecord q = QARecord::from_json(j);
            ++qa_total;
            q.origin == QaOrigin::generated ? ++qa_generated : ++qa_cross;
            if (q.status == QaStatus::retained) ++qa_retained;
            if (q.status == QaStatus::discarded) ++qa_discarded;
            if (q.status == QaStatus::pending) ++qa_pending;
        }
    }

    std::vector<long> bins = score_histogram(scores);
    nlohmann::json bin_rows = nlohmann::json::array();
    for (int i = 0; i < kHistogramBins; ++i)
        bin_rows.push_back({{"lo", i * kBinWidth},
                            {"hi", (i + 1) * kBinWidth},
                            {"count", bins[static_cast<size_t>(i)]}});

    const long qa_decided = qa_retained + qa_discarded;
    return {
        {"schema", 1},
        {"dataset",
         {{"originals_ingested", originals_total},
          {"originals_kept", originals_active},
          {"originals_excluded", originals_excluded},
          {"variation_images_generated", candidates_total},
          {"variation_images_kept", variations_active},
          {"candidates_discarded", candidates_discarded},
          {"candidates_failed", candidates_failed},
          {"images_total", originals_active + variations_active}}},
        {"vqascore_histogram",
         {{"bin_width", kBinWidth},
          {"threshold", gate_threshold},
          {"scored", static_cast<long>(scores.size())},
          {"bins", bin_rows}}},
        {"qa",
         {{"total", qa_total},
          {"generated", qa_generated},
          {"cross_applied", qa_cross},
          {"retained", qa_retained},
          {"discarded", qa_discarded},
          {"pending", qa_pending},
          {"pass_fraction",
           qa_decided > 0 ? static_cast<double>(qa_retained) / qa_decided : 0.0}}},
    };
}

std::string render_text(const nlohmann::json& report) {
    std::ostringstream out;
    const auto& d = report["dataset"];
    out << "Dataset\n";
    out << "  originals ingested   " << d["originals_ingested"].get<long>() << "\n";
    out << "  originals kept       " << d["originals_kept"].get<long>() << "\n";
    out << "  originals excluded   " << d["originals_excluded"].get<long>() << "\n";
    out << "  variations generated " << d["variation_images_generated"].get<long>() << "\n";
    out << "  variations kept      " << d["variation_images_kept"].get<long>() << "\n";
    out << "  images total         " << d["images_total"].get<long>() << "\n";

    const auto& h = report["vqascore_histogram"];
    out << "\nVQAScore distribution (bin width " << std::fixed << std::setprecision(2)
        << h["bin_width"].get<double>() << ", threshold " << h["threshold"].get<double>()
        << ", n=" << h["scored"].get<long>() << ")\n";
    long max_count = 1;
    for (const auto& b : h["bins"]) max_count = std::max(max_count, b["count"].get<long>());
    for (const auto& b : h["bins"]) {
        double lo = b["lo"].get<double>();
        long count = b["count"].get<long>();
        int bar = static_cast<int>(40.0 * static_cast<double>(count) /
                                   static_cast<double>(max_count));
        out << "  [" << std::setw(4) << lo << "," << std::setw(4) << b["hi"].get<double>() << ")"
            << (lo + 1e-9 >= h["threshold"].get<double>() &&
                        lo - 0.05 + 1e-9 < h["threshold"].get<double>()
                    ? " >=| "
                    : "     ")
            << std::setw(6) << count << " " << std::string(static_cast<size_t>(bar), '#') << "\n";
    }

    const auto& q = report["qa"];
    out << "\nQA pairs\n";
    out << "  generated            " << q["generated"].get<long>() << "\n";
    out << "  cross-applied        " << q["cross_applied"].get<long>() << "\n";
    out << "  retained             " << q["retained"].get<long>() << "\n";
    out << "  discarded            " << q["discarded"].get<long>() << "\n";
    out << "  pass fraction        " << std::setprecision(4) << q["pass_fraction"].get<double>()
        << "\n";
    return out.str();
}

}  // namespace visvar::report
