#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace visvar::report {

// Fixed-width histogram over [0,1]: 20 bins of 0.05; the final bin is
// closed so a score of exactly 1.0 lands in [0.95, 1.00].
inline constexpr int kHistogramBins = 20;
inline constexpr double kBinWidth = 0.05;

int bin_index(double score);
std::vector<long> score_histogram(const std::vector<double>& scores);

// Builds the run report from the folded visible records: dataset totals in
// the shape of the construction statistics, the VQAScore histogram with the
// gate threshold marker, and QA pass/fail proportions.
nlohmann::json build_report(const std::vector<nlohmann::json>& records, double gate_threshold);

std::string render_text(const nlohmann::json& report);

}  // namespace visvar::report
