#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "visvar/errors.hpp"
#include "visvar/eval.hpp"
#include "visvar/report.hpp"

using namespace visvar;
using namespace visvar::eval;

namespace {

PopeItem item(bool label_yes, PopeSetting setting = PopeSetting::random) {
    PopeItem it;
    it.image_uri = "img.ppm";
    it.question = "Is there a thing in the image?";
    it.label_yes = label_yes;
    it.setting = setting;
    return it;
}

// Brute-force oracle: iterate labeled (label, prediction) pairs and count,
// never touching the closed forms under test.
struct Oracle {
    double accuracy, precision, recall, f1;
};

Oracle brute_force(long tp, long fp, long tn, long fn) {
    std::vector<std::pair<bool, bool>> pairs;  // (label, predicted)
    for (long i = 0; i < tp; ++i) pairs.emplace_back(true, true);
    for (long i = 0; i < fp; ++i) pairs.emplace_back(false, true);
    for (long i = 0; i < tn; ++i) pairs.emplace_back(false, false);
    for (long i = 0; i < fn; ++i) pairs.emplace_back(true, false);
    long correct = 0, predicted_pos = 0, correct_pos = 0, actual_pos = 0;
    for (auto [label, pred] : pairs) {
        if (label == pred) ++correct;
        if (pred) {
            ++predicted_pos;
            if (label) ++correct_pos;
        }
        if (label) ++actual_pos;
    }
    Oracle o{};
    o.accuracy = pairs.empty() ? 0.0 : static_cast<double>(correct) / pairs.size();
    o.precision = predicted_pos ? static_cast<double>(correct_pos) / predicted_pos : 0.0;
    o.recall = actual_pos ? static_cast<double>(correct_pos) / actual_pos : 0.0;
    o.f1 = o.precision + o.recall > 0 ? 2 * o.precision * o.recall / (o.precision + o.recall)
                                      : 0.0;
    return o;
}

}  // namespace

TEST_CASE("answer normalization takes the first alphabetic token") {
    CHECK(normalize_answer("Yes, the toy alligator is holding a toothbrush.") == Norm::yes);
    CHECK(normalize_answer("No, there are no other people visible in the image.") == Norm::no);
    CHECK(normalize_answer("The bird is blue and white.") == Norm::unparseable);
    CHECK(normalize_answer("  YES") == Norm::yes);
    CHECK(normalize_answer("'no.'") == Norm::no);
    CHECK(normalize_answer("") == Norm::unparseable);
}

TEST_CASE("worked example: tp=40 fp=10 tn=45 fn=5") {
    std::vector<std::pair<PopeItem, std::string>> answered;
    for (int i = 0; i < 40; ++i) answered.emplace_back(item(true), "Yes, it is.");
    for (int i = 0; i < 10; ++i) answered.emplace_back(item(false), "Yes.");
    for (int i = 0; i < 45; ++i) answered.emplace_back(item(false), "No.");
    for (int i = 0; i < 5; ++i) answered.emplace_back(item(true), "No, nothing.");
    auto report = score(answered);
    const EvalResult& r = report.overall_micro;
    CHECK(r.counts.tp == 40);
    CHECK(r.counts.fp == 10);
    CHECK(r.counts.tn == 45);
    CHECK(r.counts.fn == 5);
    CHECK(r.accuracy == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(r.precision == doctest::Approx(0.80).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(40.0 / 45.0).epsilon(1e-12));
    CHECK(r.f1 == doctest::Approx(0.8421).epsilon(1e-4));
    auto oracle = brute_force(40, 10, 45, 5);
    CHECK(r.f1 == doctest::Approx(oracle.f1).epsilon(1e-12));
}

TEST_CASE("perfect answers give accuracy and f1 of one") {
    std::vector<std::pair<PopeItem, std::string>> answered;
    for (int i = 0; i < 20; ++i) answered.emplace_back(item(i % 2 == 0), i % 2 == 0 ? "yes" : "no");
    auto report = score(answered);
    CHECK(report.overall_micro.accuracy == 1.0);
    CHECK(report.overall_micro.f1 == 1.0);
}

TEST_CASE("always-no on balanced labels: accuracy one half, recall and f1 zero") {
    std::vector<std::pair<PopeItem, std::string>> answered;
    for (int i = 0; i < 50; ++i) answered.emplace_back(item(true), "no");
    for (int i = 0; i < 50; ++i) answered.emplace_back(item(false), "no");
    auto r = score(answered).overall_micro;
    CHECK(r.accuracy == doctest::Approx(0.5));
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
    CHECK(r.precision == 0.0);  // tp+fp = 0 convention
}

TEST_CASE("unparseable answers count against the label and are tallied") {
    std::vector<std::pair<PopeItem, std::string>> answered;
    answered.emplace_back(item(true), "The bird is blue.");   // -> fn
    answered.emplace_back(item(false), "Probably present.");  // -> fp
    auto r = score(answered).overall_micro;
    CHECK(r.counts.fn == 1);
    CHECK(r.counts.fp == 1);
    CHECK(r.unparseable_count == 2);
    CHECK(r.accuracy == 0.0);
}

TEST_CASE("score rejects empty input and is permutation invariant") {
    CHECK_THROWS_AS(score({}), PreconditionError);

    std::mt19937_64 rng(5);
    std::vector<std::pair<PopeItem, std::string>> answered;
    for (int i = 0; i < 60; ++i) {
        auto setting = static_cast<PopeSetting>(rng() % 3);
        answered.emplace_back(item(rng() % 2 == 0, setting), rng() % 2 ? "yes" : "no");
    }
    auto before = score(answered).to_json();
    std::shuffle(answered.begin(), answered.end(), rng);
    CHECK(score(answered).to_json() == before);
}

TEST_CASE("micro average equals scoring the concatenated list") {
    std::mt19937_64 rng(17);
    std::vector<std::pair<PopeItem, std::string>> answered;
    for (int i = 0; i < 200; ++i) {
        auto setting = static_cast<PopeSetting>(rng() % 3);
        const char* ans = rng() % 5 == 0 ? "maybe" : (rng() % 2 ? "yes" : "no");
        answered.emplace_back(item(rng() % 2 == 0, setting), ans);
    }
    auto report = score(answered);
    // Re-score with every item forced into one setting: the per-setting
    // result of that single setting must equal the original micro average.
    auto merged = answered;
    for (auto& [it, ans] : merged) it.setting = PopeSetting::random;
    auto merged_report = score(merged);
    CHECK(merged_report.overall_micro.accuracy ==
          doctest::Approx(report.overall_micro.accuracy).epsilon(1e-12));
    CHECK(merged_report.overall_micro.f1 ==
          doctest::Approx(report.overall_micro.f1).epsilon(1e-12));
    CHECK(merged_report.per_setting.at(PopeSetting::random).counts.total() ==
          report.overall_micro.counts.total());
}

TEST_CASE("closed forms match the brute-force oracle on random configurations") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        long tp = static_cast<long>(rng() % 50), fp = static_cast<long>(rng() % 50);
        long tn = static_cast<long>(rng() % 50), fn = static_cast<long>(rng() % 50);
        if (tp + fp + tn + fn == 0) tp = 1;
        auto r = EvalResult::from_counts({tp, fp, tn, fn});
        auto o = brute_force(tp, fp, tn, fn);
        CHECK(r.accuracy == doctest::Approx(o.accuracy).epsilon(1e-12));
        CHECK(r.precision == doctest::Approx(o.precision).epsilon(1e-12));
        CHECK(r.recall == doctest::Approx(o.recall).epsilon(1e-12));
        CHECK(r.f1 == doctest::Approx(o.f1).epsilon(1e-12));
    }
}

TEST_CASE("pope release conversion") {
    auto dir = std::filesystem::temp_directory_path() / "visvar_pope_conv";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "coco_pope_popular.json");
        out << R"({"question_id": 1, "image": "COCO_val2014_000000310196.jpg", "text": "Is there a snowboard in the image?", "label": "yes"})"
            << "\n";
        out << R"({"question_id": 2, "image": "COCO_val2014_000000310196.jpg", "text": "Is there a car in the image?", "label": "no"})"
            << "\n";
    }
    auto items = convert_pope_release(dir / "coco_pope_popular.json", PopeSetting::popular);
    REQUIRE(items.size() == 2);
    CHECK(items[0].question == "Is there a snowboard in the image?");
    CHECK(items[0].label_yes);
    CHECK_FALSE(items[1].label_yes);
    CHECK(items[1].setting == PopeSetting::popular);
}

TEST_CASE("histogram bins follow the documented example and sum to the input size") {
    using namespace visvar::report;
    CHECK(bin_index(0.12) == 2);   // [0.10, 0.15)
    CHECK(bin_index(0.61) == 12);  // [0.60, 0.65)
    CHECK(bin_index(0.99) == 19);  // [0.95, 1.00]
    CHECK(bin_index(1.0) == 19);   // closed top bin
    CHECK(bin_index(0.0) == 0);
    CHECK_THROWS_AS(bin_index(1.01), PreconditionError);

    auto bins = score_histogram({0.12, 0.61, 0.99});
    CHECK(bins[2] == 1);
    CHECK(bins[12] == 1);
    CHECK(bins[19] == 1);
    long sum = 0;
    for (long b : bins) sum += b;
    CHECK(sum == 3);

    auto empty = score_histogram({});
    CHECK(std::count(empty.begin(), empty.end(), 0L) == kHistogramBins);
}
