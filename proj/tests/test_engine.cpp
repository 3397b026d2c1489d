#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "visvar/config.hpp"
#include "visvar/digest.hpp"
#include "visvar/engine.hpp"
#include "visvar/errors.hpp"
#include "visvar/image.hpp"
#include "visvar/util.hpp"

using namespace visvar;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("visvar_engine_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string seed_image(int index) {
    std::uint64_t h = digest_u64("engine-test-seed|" + std::to_string(index));
    return img::make_ppm(48, 32, [&](int x, int y) {
        return img::Rgb{static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(x * 3),
                        static_cast<std::uint8_t>(y * 5)};
    });
}

nlohmann::json mock_entry(const std::string& model) {
    return {{"endpoint", "mock:"}, {"model", model}};
}

// Writes seed images + input manifest into `dir` and returns a parsed config.
RunConfig make_mock_config(const fs::path& dir, int images, int workers,
                           std::uint64_t seed = 42,
                           const std::vector<std::string>& stages = {}) {
    fs::create_directories(dir / "seeds");
    std::ofstream manifest(dir / "input.jsonl");
    for (int i = 0; i < images; ++i) {
        std::string name = "seeds/s" + std::to_string(i) + ".ppm";
        std::ofstream img_file(dir / name, std::ios::binary);
        img_file << seed_image(i);
        manifest << nlohmann::json{{"uri", name}}.dump() << "\n";
    }
    nlohmann::json j = {
        {"schema", 1},
        {"seed", seed},
        {"input_manifest", "input.jsonl"},
        {"output_dir", "out"},
        {"max_workers", workers},
        {"backends",
         {{"chat", mock_entry("chat-m")},
          {"captioner", mock_entry("cap-m")},
          {"segmenter", mock_entry("seg-m")},
          {"image_generator", mock_entry("gen-m")},
          {"vqa_scorer", mock_entry("vqa-m")},
          {"describer", mock_entry("desc-m")},
          {"tagger", mock_entry("tag-m")},
          {"answerer", mock_entry("ans-m")}}},
        {"variation", {{"variant_count", 4}, {"threshold", 0.6}}},
        {"instruction", {{"cross_fraction", 0.5}, {"questions_per_image", 7}}},
        {"panel",
         {{"experts", {mock_entry("e1"), mock_entry("e2"), mock_entry("e3")}},
          {"retain_min_yes", 2}}},
    };
    if (!stages.empty()) j["stages"] = stages;
    return parse_config(j, dir);
}

}  // namespace

TEST_CASE("full mock run produces a consistent finalized dataset") {
    auto dir = fresh_dir("full");
    auto cfg = make_mock_config(dir, 6, 4);
    engine::Engine eng(cfg);

    auto plan = eng.plan_all();
    REQUIRE_FALSE(plan.empty());
    CHECK(plan.front().stage == "ingest");

    auto outcome = eng.run();
    REQUIRE(outcome.completed);
    REQUIRE_FALSE(outcome.summary.is_null());
    CHECK(outcome.stats.max_parallel_tasks <= 4);

    const auto& s = outcome.summary;
    CHECK(s["images_total"].get<long>() ==
          s["originals_kept"].get<long>() + s["variation_images_kept"].get<long>());
    CHECK(s["originals_kept"].get<long>() + s["originals_excluded"].get<long>() == 6);
    CHECK(s["qa_total"].get<long>() ==
          s["qa_retained"].get<long>() + s["qa_discarded"].get<long>());

    // dataset-shape scans over the visible store
    auto records = engine::visible_records(eng.store(), eng.manifest());
    std::map<std::string, int> active_children;
    std::map<std::string, ImageRecord> images;
    std::map<std::string, std::vector<QARecord>> qa_by_image;
    for (const auto& r : records) {
        if (r.value("type", "") == "image") {
            auto img = ImageRecord::from_json(r);
            if (img.kind == ImageKind::variation && img.status == ImageStatus::active)
                ++active_children[*img.parent_id];
            images[img.id] = img;
        } else if (r.value("type", "") == "qa") {
            auto qa = QARecord::from_json(r);
            CHECK(qa.status != QaStatus::pending);
            if (qa.status == QaStatus::retained) CHECK(qa.yes_count() >= 2);
            qa_by_image[qa.image_id].push_back(qa);
        } else if (r.value("type", "") == "candidate") {
            auto c = VariationCandidate::from_json(r);
            if (c.decision == Decision::kept) {
                REQUIRE(c.vqa_score.has_value());
                CHECK(*c.vqa_score >= 0.6);
            }
        }
    }
    for (const auto& [id, img] : images) {
        if (img.kind != ImageKind::original) continue;
        if (img.status == ImageStatus::active) CHECK(active_children[id] >= 1);
        if (img.status == ImageStatus::excluded) CHECK(active_children[id] == 0);
    }

    // variation images carry 7 generated + round_half_up(0.5*7)=4 cross questions
    for (const auto& [image_id, qas] : qa_by_image) {
        const auto& img = images.at(image_id);
        long generated = 0, cross = 0;
        for (const auto& qa : qas) {
            if (qa.origin == QaOrigin::generated) ++generated;
            if (qa.origin == QaOrigin::cross_applied) {
                ++cross;
                REQUIRE(img.kind == ImageKind::variation);
                CHECK(*qa.source_image_id == *img.parent_id);
                // cross-applied question text appears verbatim among the
                // parent's generated questions
                bool found = false;
                for (const auto& pq : qa_by_image.at(*img.parent_id))
                    if (pq.origin == QaOrigin::generated && pq.question == qa.question)
                        found = true;
                CHECK(found);
            }
        }
        CHECK(generated == 7);
        if (img.kind == ImageKind::variation) CHECK(cross == 4);
        if (img.kind == ImageKind::original) CHECK(cross == 0);
    }

    // a completed run plans nothing and a rerun leaves the store untouched
    CHECK(eng.plan_all().empty());
    auto bytes_before = read_file(cfg.output_dir / "records.jsonl");
    engine::Engine again(make_mock_config(dir, 6, 4));
    auto outcome2 = again.run();
    CHECK(outcome2.completed);
    CHECK(outcome2.stats.tasks_run == 0);
    CHECK(read_file(cfg.output_dir / "records.jsonl") == bytes_before);
}

TEST_CASE("worker count does not affect the store bytes") {
    auto dir1 = fresh_dir("det_w1");
    auto dir4 = fresh_dir("det_w4");
    engine::Engine e1(make_mock_config(dir1, 5, 1));
    engine::Engine e4(make_mock_config(dir4, 5, 8));
    REQUIRE(e1.run().completed);
    REQUIRE(e4.run().completed);
    CHECK(read_file(dir1 / "out" / "records.jsonl") == read_file(dir4 / "out" / "records.jsonl"));
    CHECK(read_file(dir1 / "out" / "summary.json") == read_file(dir4 / "out" / "summary.json"));
}

TEST_CASE("a run stopped after the variation stage resumes at instruction") {
    auto dir = fresh_dir("partial");
    {
        engine::Engine eng(make_mock_config(dir, 4, 4, 42, {"ingest", "variation"}));
        REQUIRE(eng.run().completed);
    }
    // stage-list changes do not touch the config digest, so the manifest
    // stays valid and planning picks up at the instruction stage
    engine::Engine full(make_mock_config(dir, 4, 4));
    auto plan = full.plan_all();
    REQUIRE_FALSE(plan.empty());
    CHECK(plan.front().stage == "instruction");
    REQUIRE(full.run().completed);
}

TEST_CASE("config digest change on a dirty store is refused") {
    auto dir = fresh_dir("dirty");
    {
        engine::Engine eng(make_mock_config(dir, 3, 2));
        REQUIRE(eng.run().completed);
    }
    CHECK_THROWS_AS(engine::Engine(make_mock_config(dir, 3, 2, 43)), ConfigError);
}

TEST_CASE("finalize applies the exclusion rule to a handcrafted store") {
    auto dir = fresh_dir("finalize_toy");
    auto cfg = make_mock_config(dir, 1, 1, 42, {"finalize"});

    PipelineManifest manifest;
    manifest.run_id = "toy";
    manifest.config_digest = cfg.digest();
    {
        RecordStore store(cfg.output_dir);
        const std::string caption = "a zebra standing in a field of grass";
        const std::vector<int> kept_counts = {2, 0, 1};
        int edit_counter = 0;
        for (size_t o = 0; o < kept_counts.size(); ++o) {
            ImageRecord orig;
            orig.id = std::string("originalid") + std::to_string(o);
            orig.uri = store.put_blob("images", seed_image(static_cast<int>(o)), "ppm");
            orig.caption = caption;
            orig.tags = {"zebra", "grass"};
            orig.status = ImageStatus::pending;
            auto oj = orig.to_json();
            oj["committed_by"] = "ingest/" + orig.id;
            store.append_new(oj);
            manifest.mark_done("ingest", orig.id, "d", {orig.id});

            std::vector<std::string> outputs = {orig.id};
            // one scored-but-discarded candidate per original, plus the kept ones
            for (int k = 0; k < kept_counts[o] + 1; ++k) {
                const bool kept = k < kept_counts[o];
                std::string replacement = "golden patch" + std::to_string(edit_counter++);
                VariationCandidate cand;
                cand.edited_caption = "a zebra standing in a field of " + replacement;
                cand.id = variation_candidate_id(orig.id, cand.edited_caption);
                cand.parent_id = orig.id;
                cand.target_word = "grass";
                cand.replacement_phrase = replacement;
                cand.vqa_score = kept ? 0.8 : 0.3;
                cand.decision = kept ? Decision::kept : Decision::discarded;
                auto cj = cand.to_json();
                cj["committed_by"] = "variation/" + orig.id;
                store.append_new(cj);
                outputs.push_back(cand.id);
                if (kept) {
                    ImageRecord var;
                    var.id = variation_image_id(cand.id);
                    var.kind = ImageKind::variation;
                    var.parent_id = orig.id;
                    var.uri = orig.uri;
                    var.caption = cand.edited_caption;
                    var.status = ImageStatus::active;
                    auto vj = var.to_json();
                    vj["committed_by"] = "variation/" + orig.id;
                    store.append_new(vj);
                    outputs.push_back(var.id);
                }
            }
            manifest.mark_done("variation", orig.id, "d", outputs);
        }
    }
    manifest.save(cfg.output_dir / "manifest.json");

    engine::Engine eng(cfg);
    auto outcome = eng.run();
    REQUIRE(outcome.completed);
    CHECK(outcome.summary["originals_kept"].get<long>() == 2);
    CHECK(outcome.summary["originals_excluded"].get<long>() == 1);
    CHECK(outcome.summary["variation_images_kept"].get<long>() == 3);
    CHECK(outcome.summary["images_total"].get<long>() == 5);
    CHECK(outcome.summary["variation_images_generated"].get<long>() == 6);

    // the zero-kept original was excluded, and finalize is idempotent
    auto records = engine::visible_records(eng.store(), eng.manifest());
    for (const auto& r : records) {
        if (r.value("type", "") != "image") continue;
        auto img = ImageRecord::from_json(r);
        if (img.id == "originalid1") CHECK(img.status == ImageStatus::excluded);
        if (img.id == "originalid0" || img.id == "originalid2")
            CHECK(img.status == ImageStatus::active);
    }
    auto bytes = read_file(cfg.output_dir / "records.jsonl");
    engine::Engine rerun(make_mock_config(dir, 1, 1, 42, {"finalize"}));
    REQUIRE(rerun.run().completed);
    CHECK(read_file(cfg.output_dir / "records.jsonl") == bytes);
}

TEST_CASE("half-committed task output stays invisible") {
    auto dir = fresh_dir("visibility");
    auto cfg = make_mock_config(dir, 1, 1);
    PipelineManifest manifest;
    manifest.config_digest = cfg.digest();
    RecordStore store(cfg.output_dir);

    ImageRecord committed;
    committed.id = "vis1";
    committed.uri = "images/x.ppm";
    committed.caption = "c";
    auto cj = committed.to_json();
    cj["committed_by"] = "ingest/vis1";
    store.append_new(cj);
    manifest.mark_done("ingest", "vis1", "d", {"vis1"});

    ImageRecord orphan;  // appended but its task never reached the manifest
    orphan.id = "vis2";
    orphan.uri = "images/y.ppm";
    orphan.caption = "c2";
    auto oj = orphan.to_json();
    oj["committed_by"] = "ingest/vis2";
    store.append_new(oj);

    auto visible = engine::visible_records(store, manifest);
    REQUIRE(visible.size() == 1);
    CHECK(visible[0]["id"] == "vis1");
}
