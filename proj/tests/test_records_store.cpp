#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "visvar/errors.hpp"
#include "visvar/image.hpp"
#include "visvar/records.hpp"
#include "visvar/store.hpp"

using namespace visvar;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("visvar_test_" + tag + "_" +
                                              std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ImageRecord make_original(const std::string& id) {
    ImageRecord r;
    r.id = id;
    r.uri = "images/" + id + ".ppm";
    r.kind = ImageKind::original;
    r.caption = "a zebra in a field of grass";
    r.tags = {"zebra", "grass"};
    return r;
}
}  // namespace

TEST_CASE("image record round-trips field-identically") {
    ImageRecord r = make_original("img1");
    r.mask_uri = "masks/m.ppm";
    r.status = ImageStatus::active;
    ImageRecord back = ImageRecord::from_json(r.to_json());
    CHECK(back.id == r.id);
    CHECK(back.uri == r.uri);
    CHECK(back.kind == r.kind);
    CHECK(back.caption == r.caption);
    CHECK(back.tags == r.tags);
    CHECK(back.mask_uri == r.mask_uri);
    CHECK(back.status == r.status);
}

TEST_CASE("image record invariants name their violation") {
    ImageRecord r = make_original("img1");
    r.kind = ImageKind::variation;  // parent_id missing
    try {
        r.validate();
        FAIL("expected InvariantError");
    } catch (const InvariantError& e) {
        CHECK(e.invariant() == "image.variation_parent");
    }
    ImageRecord o = make_original("img2");
    o.parent_id = "something";
    CHECK_THROWS_AS(o.validate(), InvariantError);
}

TEST_CASE("candidate invariants: kept requires score at or above threshold") {
    VariationCandidate c;
    c.id = "cand";
    c.parent_id = "img";
    c.edited_caption = "a zebra in a field of golden wheat";
    c.gate_threshold = 0.6;
    c.decision = Decision::kept;
    CHECK_THROWS_AS(c.validate(), InvariantError);  // no score
    c.vqa_score = 0.59;
    CHECK_THROWS_AS(c.validate(), InvariantError);  // below threshold
    c.vqa_score = 0.6;
    CHECK_NOTHROW(c.validate());
    c.vqa_score = 1.5;
    CHECK_THROWS_AS(c.validate(), InvariantError);  // out of range
}

TEST_CASE("qa invariants: retained needs two yes votes, experts unique") {
    QARecord q;
    q.id = "qa";
    q.image_id = "img";
    q.question = "Is there a zebra?";
    q.answer = "Yes, there is.";
    q.verdicts = {{"a", Vote::yes}, {"b", Vote::no}, {"c", Vote::no}};
    q.status = QaStatus::retained;
    CHECK_THROWS_AS(q.validate(), InvariantError);
    q.verdicts = {{"a", Vote::yes}, {"b", Vote::yes}, {"c", Vote::no}};
    CHECK_NOTHROW(q.validate());
    q.verdicts = {{"a", Vote::yes}, {"a", Vote::yes}, {"c", Vote::no}};
    CHECK_THROWS_AS(q.validate(), InvariantError);

    QARecord cross = q;
    cross.verdicts = {{"a", Vote::yes}, {"b", Vote::yes}};
    cross.origin = QaOrigin::cross_applied;
    CHECK_THROWS_AS(cross.validate(), InvariantError);  // source image missing
    cross.source_image_id = "parent";
    CHECK_NOTHROW(cross.validate());
}

TEST_CASE("store append, fold, and duplicate handling") {
    auto dir = temp_dir("store");
    RecordStore store(dir);
    ImageRecord r = make_original("a1");
    store.append_new(r.to_json());
    CHECK(store.contains("a1"));

    // duplicate id, identical content: idempotent replay
    CHECK(store.append_new(r.to_json()) == "a1");
    CHECK(store.all_versions().size() == 1);

    // duplicate id, different content: rejected
    ImageRecord other = make_original("a1");
    other.caption = "different";
    CHECK_THROWS_AS(store.append_new(other.to_json()), StoreError);

    // update appends a version; identical update is a no-op
    r.status = ImageStatus::active;
    store.append_update(r.to_json());
    CHECK(store.all_versions().size() == 2);
    store.append_update(r.to_json());
    CHECK(store.all_versions().size() == 2);

    auto folded = store.fold();
    REQUIRE(folded.size() == 1);
    CHECK(folded[0]["status"] == "active");

    // update for unknown id rejected
    ImageRecord missing = make_original("zz");
    CHECK_THROWS_AS(store.append_update(missing.to_json()), StoreError);

    // invariant violations rejected at append with the invariant named
    ImageRecord bad = make_original("b1");
    bad.kind = ImageKind::variation;
    CHECK_THROWS_AS(store.append_new(bad.to_json()), InvariantError);
}

TEST_CASE("store is append-only and survives reopen in append order") {
    auto dir = temp_dir("appendonly");
    std::vector<std::string> ids;
    {
        RecordStore store(dir);
        for (int i = 0; i < 8; ++i) {
            ImageRecord r = make_original("img" + std::to_string(i));
            ids.push_back(store.append_new(r.to_json()));
        }
    }
    RecordStore reopened(dir);
    auto versions = reopened.all_versions();
    REQUIRE(versions.size() == ids.size());
    for (size_t i = 0; i < ids.size(); ++i) CHECK(versions[i]["id"] == ids[i]);
}

TEST_CASE("unknown fields are preserved across rewrites") {
    auto dir = temp_dir("unknown");
    RecordStore store(dir);
    nlohmann::json raw = make_original("u1").to_json();
    raw["custom_annotation"] = {{"source", "external"}, {"v", 3}};
    store.append_new(raw);

    ImageRecord r = ImageRecord::from_json(store.current("u1"));
    r.status = ImageStatus::excluded;
    r.note = "swept";
    store.append_update(r.to_json());

    auto current = store.current("u1");
    CHECK(current["status"] == "excluded");
    CHECK(current["custom_annotation"]["v"] == 3);
}

TEST_CASE("records missing the schema field are rejected") {
    auto dir = temp_dir("schema");
    {
        RecordStore store(dir);
        store.append_new(make_original("ok").to_json());
    }
    {
        std::ofstream out(dir / "records.jsonl", std::ios::app);
        out << R"({"id":"rogue","type":"image"})" << "\n";
    }
    CHECK_THROWS_AS(RecordStore{dir}, StoreError);
}

TEST_CASE("blob storage is content-addressed") {
    auto dir = temp_dir("blob");
    RecordStore store(dir);
    std::string bytes = img::make_ppm(4, 4, [](int, int) { return img::Rgb{1, 2, 3}; });
    std::string uri = store.put_blob("images", bytes, "ppm");
    CHECK(uri.rfind("images/", 0) == 0);
    CHECK(store.has_blob(uri));
    CHECK(store.read_blob(uri) == bytes);
    CHECK(store.put_blob("images", bytes, "ppm") == uri);
}
