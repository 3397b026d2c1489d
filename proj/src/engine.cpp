#include "visvar/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "visvar/digest.hpp"
#include "visvar/errors.hpp"
#include "visvar/image.hpp"
#include "visvar/instruction.hpp"
#include "visvar/log.hpp"
#include "visvar/text.hpp"
#include "visvar/util.hpp"

namespace visvar::engine {

using backends::BackendClient;
using backends::Role;

std::vector<nlohmann::json> visible_records(const RecordStore& store,
                                            const PipelineManifest& manifest) {
    std::set<std::string> done;
    for (const auto& [key, entry] : manifest.entries)
        if (entry.state == TaskState::done) done.insert(key);

    std::vector<nlohmann::json> out;
    std::map<std::string, size_t> pos;
    for (const auto& v : store.all_versions()) {
        if (!done.count(v.value("committed_by", ""))) continue;
        const std::string id = v["id"].get<std::string>();
        auto it = pos.find(id);
        if (it == pos.end()) {
            pos[id] = out.size();
            out.push_back(v);
        } else {
            out[it->second] = v;
        }
    }
    return out;
}

namespace {

int stage_rank(const std::string& stage) {
    if (stage == "ingest") return 0;
    if (stage == "variation") return 1;
    if (stage == "instruction") return 2;
    if (stage == "qa_gate") return 3;
    if (stage == "finalize") return 4;
    return 99;
}

// Read-only snapshot shared by all workers of one stage cycle. The committer
// is the only writer of the store while a cycle runs.
struct View {
    std::vector<nlohmann::json> records;
    std::map<std::string, const nlohmann::json*> by_id;
    std::map<std::string, std::vector<nlohmann::json>> history;  // visible versions per id

    static View build(const RecordStore& store, const PipelineManifest& manifest) {
        View v;
        std::set<std::string> done;
        for (const auto& [key, entry] : manifest.entries)
            if (entry.state == TaskState::done) done.insert(key);
        for (const auto& version : store.all_versions()) {
            if (!done.count(version.value("committed_by", ""))) continue;
            v.history[version["id"].get<std::string>()].push_back(version);
        }
        std::map<std::string, size_t> pos;
        for (const auto& version : store.all_versions()) {
            if (!done.count(version.value("committed_by", ""))) continue;
            const std::string id = version["id"].get<std::string>();
            auto it = pos.find(id);
            if (it == pos.end()) {
                pos[id] = v.records.size();
                v.records.push_back(version);
            } else {
                v.records[it->second] = version;
            }
        }
        for (const auto& r : v.records) v.by_id[r["id"].get<std::string>()] = &r;
        return v;
    }

    const nlohmann::json* find(const std::string& id) const {
        auto it = by_id.find(id);
        return it == by_id.end() ? nullptr : it->second;
    }

    // Latest visible version of `id` committed by a stage strictly earlier
    // in the DAG than `stage`. Task input digests hash this basis, so a
    // stage updating its own inputs does not re-plan itself on resume.
    const nlohmann::json* basis_for(const std::string& id, const std::string& stage) const {
        auto it = history.find(id);
        if (it == history.end()) return nullptr;
        const int rank = stage_rank(stage);
        const nlohmann::json* basis = nullptr;
        for (const auto& version : it->second) {
            std::string by = version.value("committed_by", "");
            if (stage_rank(by.substr(0, by.find('/'))) < rank) basis = &version;
        }
        return basis;
    }
};

std::string run_seed_key(std::uint64_t seed, const std::string& salt) {
    return std::to_string(seed) + "|" + salt;
}

}  // namespace

struct EngineView {
    View view;
};

Engine::Engine(RunConfig config) : config_(std::move(config)) {
    std::filesystem::create_directories(config_.output_dir);
    store_ = std::make_unique<RecordStore>(config_.output_dir);
    manifest_path_ = config_.output_dir / "manifest.json";

    const std::string digest = config_.digest();
    auto existing = PipelineManifest::load(manifest_path_);
    if (existing && existing->config_digest == digest) {
        manifest_ = std::move(*existing);
    } else {
        if (existing && store_->record_count() > 0)
            throw ConfigError(
                "config digest " + digest.substr(0, 12) + " does not match manifest digest " +
                existing->config_digest.substr(0, 12) + " and the store at " +
                config_.output_dir.string() +
                " is not empty; use a fresh output_dir or restore the original config");
        manifest_ = PipelineManifest{};
    }
    manifest_.run_id = digest.substr(0, 16);
    manifest_.config_digest = digest;
    manifest_.verify_against(*store_);

    for (const auto& [role, profile] : config_.backend_table)
        clients_[role] = std::make_unique<BackendClient>(
            profile, backends::make_transport(profile, config_.seed));
    for (const auto& profile : config_.panel.experts)
        experts_.push_back(std::make_unique<BackendClient>(
            profile, backends::make_transport(profile, config_.seed)));
}

BackendClient& Engine::client(Role role) {
    auto it = clients_.find(role);
    if (it == clients_.end())
        throw ConfigError("no backend configured for role '" + backends::to_string(role) + "'");
    return *it->second;
}

// ----------------------------------------------------------------- planning

std::vector<Task> Engine::plan_stage(const std::string& stage) {
    View view = View::build(*store_, manifest_);
    std::vector<Task> tasks;

    auto add = [&](Task t) {
        if (!manifest_.is_done(t.stage, t.key, t.input_digest)) tasks.push_back(std::move(t));
    };

    if (stage == "ingest") {
        if (!std::filesystem::exists(config_.input_manifest))
            throw ConfigError("input manifest not found: " + config_.input_manifest.string());
        std::ifstream in(config_.input_manifest);
        std::string line;
        size_t lineno = 0;
        std::set<std::string> seen;
        const auto base = config_.input_manifest.parent_path();
        while (std::getline(in, line)) {
            ++lineno;
            if (text::normalize_ws(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("input manifest line " + std::to_string(lineno) +
                                  " is not JSON: " + e.what());
            }
            if (!j.contains("uri"))
                throw ConfigError("input manifest line " + std::to_string(lineno) +
                                  " missing uri");
            const std::filesystem::path src = base / j["uri"].get<std::string>();
            std::string bytes = read_file(src);
            const std::string id = original_image_id(sha256_hex(bytes));
            if (!seen.insert(id).second) {
                log::warn("duplicate seed image skipped: " + src.string());
                continue;
            }
            Task t;
            t.stage = "ingest";
            t.key = id;
            t.input_digest = sha256_hex(sha256_hex(bytes) + "|" + j.dump());
            t.payload = {{"line", j}, {"path", src.string()}};
            if (j.contains("mask_uri"))
                t.payload["mask_path"] = (base / j["mask_uri"].get<std::string>()).string();
            add(std::move(t));
        }
    } else if (stage == "variation") {
        for (const auto& r : view.records) {
            if (r.value("type", "") != "image") continue;
            ImageRecord img = ImageRecord::from_json(r);
            if (img.kind != ImageKind::original) continue;
            const nlohmann::json* basis = view.basis_for(img.id, "variation");
            if (basis == nullptr) continue;
            if (ImageRecord::from_json(*basis).status == ImageStatus::excluded) continue;
            Task t;
            t.stage = "variation";
            t.key = img.id;
            t.input_digest = sha256_hex(basis->dump() + "|" +
                                        config_.normalized["variation"].dump() + "|" +
                                        std::to_string(config_.seed));
            t.payload = *basis;
            add(std::move(t));
        }
    } else if (stage == "instruction") {
        for (const auto& r : view.records) {
            if (r.value("type", "") != "image") continue;
            const nlohmann::json* basis = view.basis_for(r["id"].get<std::string>(),
                                                         "instruction");
            if (basis == nullptr) continue;
            ImageRecord img = ImageRecord::from_json(*basis);
            if (img.status != ImageStatus::active) continue;
            Task t;
            t.stage = "instruction";
            t.key = img.id;
            t.wave = img.kind == ImageKind::original ? 1 : 2;
            t.input_digest = sha256_hex(basis->dump() + "|" +
                                        config_.normalized["instruction"].dump() + "|" +
                                        std::to_string(config_.seed));
            t.payload = *basis;
            add(std::move(t));
        }
    } else if (stage == "qa_gate") {
        for (const auto& r : view.records) {
            if (r.value("type", "") != "qa") continue;
            const nlohmann::json* basis = view.basis_for(r["id"].get<std::string>(), "qa_gate");
            if (basis == nullptr) continue;
            QARecord qa = QARecord::from_json(*basis);
            if (qa.status != QaStatus::pending) continue;
            Task t;
            t.stage = "qa_gate";
            t.key = qa.id;
            t.input_digest =
                sha256_hex(basis->dump() + "|" + config_.normalized["panel"].dump());
            t.payload = *basis;
            add(std::move(t));
        }
    } else if (stage == "finalize") {
        std::string ids;
        for (const auto& r : view.records) ids += r["id"].get<std::string>() + "\n";
        Task t;
        t.stage = "finalize";
        t.key = "all";
        t.input_digest = sha256_hex(ids + "|" + config_.normalized["variation"].dump());
        add(std::move(t));
    } else {
        throw ConfigError("unknown stage: '" + stage + "'");
    }

    std::sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) {
        return std::tie(a.wave, a.key) < std::tie(b.wave, b.key);
    });
    return tasks;
}

std::vector<Task> Engine::plan_all() {
    std::vector<Task> all;
    for (const auto& stage : config_.stages) {
        auto tasks = plan_stage(stage);
        all.insert(all.end(), tasks.begin(), tasks.end());
    }
    return all;
}

// ---------------------------------------------------------------- execution

RunOutcome Engine::run() {
    log::open_file(config_.output_dir / "logs" / "run.jsonl");
    write_file_atomic(config_.output_dir / "config.json", config_.normalized.dump(2) + "\n");

    for (const auto& stage : config_.stages) {
        const int waves = stage == "instruction" ? 2 : 1;
        for (int wave = 1; wave <= waves; ++wave) {
            std::vector<Task> tasks;
            for (auto& t : plan_stage(stage))
                if (waves == 1 || t.wave == wave) tasks.push_back(std::move(t));
            run_tasks(std::move(tasks));
            if (stats_.tasks_failed > 0) {
                log::error("stage " + stage + " has failed tasks; stopping (resume to retry)");
                RunOutcome outcome;
                outcome.completed = false;
                outcome.stats = stats_;
                return outcome;
            }
        }
    }

    RunOutcome outcome;
    outcome.completed = true;
    outcome.stats = stats_;
    if (summary_.is_null()) {
        const auto summary_path = config_.output_dir / "summary.json";
        if (std::filesystem::exists(summary_path))
            summary_ = nlohmann::json::parse(read_file(summary_path));
    }
    outcome.summary = summary_;
    return outcome;
}

void Engine::run_tasks(std::vector<Task> tasks) {
    if (tasks.empty()) return;

    // Fresh snapshot for this cycle; workers read only this and blob files.
    cycle_view_ = std::make_shared<EngineView>();
    cycle_view_->view = View::build(*store_, manifest_);

    const size_t n = tasks.size();
    std::atomic<size_t> next{0};
    std::atomic<int> active{0};
    std::mutex mutex;
    std::condition_variable cv;
    std::map<size_t, TaskResult> ready;

    auto worker = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            int now = active.fetch_add(1) + 1;
            {
                std::lock_guard<std::mutex> lock(mutex);
                stats_.max_parallel_tasks = std::max(stats_.max_parallel_tasks, now);
            }
            TaskResult result = execute_task(tasks[i]);
            active.fetch_sub(1);
            {
                std::lock_guard<std::mutex> lock(mutex);
                ready.emplace(i, std::move(result));
            }
            cv.notify_all();
        }
    };

    const int worker_count =
        static_cast<int>(std::min<size_t>(static_cast<size_t>(config_.max_workers), n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(worker_count));
    for (int t = 0; t < worker_count; ++t) pool.emplace_back(worker);

    // Single committer: commits strictly in plan order regardless of
    // completion order, so the store file is identical for any worker count.
    for (size_t want = 0; want < n; ++want) {
        TaskResult result;
        {
            std::unique_lock<std::mutex> lock(mutex);
            cv.wait(lock, [&] { return ready.count(want) > 0; });
            result = std::move(ready[want]);
            ready.erase(want);
        }
        commit_task(tasks[want], std::move(result));
    }
    for (auto& t : pool) t.join();
    cycle_view_.reset();
}

void Engine::commit_task(const Task& task, TaskResult result) {
    const auto started = std::chrono::steady_clock::now();
    const std::string key = PipelineManifest::task_key(task.stage, task.key);

    if (!result.failure.empty()) {
        manifest_.mark_failed(task.stage, task.key, task.input_digest, result.failure);
        manifest_.save(manifest_path_);
        ++stats_.tasks_failed;
        ++stats_.tasks_run;
        log::task_line({{"stage", task.stage},
                        {"task", task.key},
                        {"outcome", "failed"},
                        {"attempts", manifest_.entries[key].attempts},
                        {"reason", result.failure},
                        {"duration_ms", 0}});
        return;
    }

    std::sort(result.records.begin(), result.records.end(),
              [](const nlohmann::json& a, const nlohmann::json& b) {
                  return a["id"].get<std::string>() < b["id"].get<std::string>();
              });
    std::vector<std::string> output_ids;
    store_->begin_batch();
    for (auto& record : result.records) {
        record["committed_by"] = key;
        const std::string id = record["id"].get<std::string>();
        if (!output_ids.empty() && output_ids.back() == id) continue;  // in-task duplicate
        if (store_->contains(id)) {
            store_->append_update(record);
        } else {
            store_->append_new(record);
        }
        output_ids.push_back(id);
    }
    store_->commit_batch();
    manifest_.mark_done(task.stage, task.key, task.input_digest, output_ids);
    manifest_.save(manifest_path_);
    ++stats_.tasks_run;

    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - started)
                  .count();
    log::task_line({{"stage", task.stage},
                    {"task", task.key},
                    {"outcome", "done"},
                    {"attempts", manifest_.entries[key].attempts},
                    {"records", output_ids.size()},
                    {"duration_ms", ms}});
}

TaskResult Engine::execute_task(const Task& task) {
    try {
        if (task.stage == "ingest") return ingest_task(task);
        if (task.stage == "variation") return variation_task(task);
        if (task.stage == "instruction") return instruction_task(task);
        if (task.stage == "qa_gate") return qa_gate_task(task);
        if (task.stage == "finalize") return finalize_task(task);
        throw ConfigError("unknown stage: " + task.stage);
    } catch (const TaskFailure& e) {
        TaskResult r;
        r.failure = e.what();
        return r;
    } catch (const PreconditionError& e) {
        TaskResult r;
        r.failure = e.what();
        return r;
    }
}

TaskResult Engine::ingest_task(const Task& task) {
    TaskResult result;
    const nlohmann::json& line = task.payload["line"];
    std::string bytes = read_file(task.payload["path"].get<std::string>());
    auto info = img::probe(bytes);
    if (!info)
        throw TaskFailure("seed image is not decodable: " +
                          task.payload["path"].get<std::string>());

    ImageRecord record;
    record.id = task.key;
    record.kind = ImageKind::original;
    record.status = ImageStatus::pending;
    record.uri = store_->put_blob("images", bytes, img::extension(info->format));
    record.caption = text::normalize_ws(line.value("caption", ""));
    if (line.contains("tags"))
        for (const auto& t : line["tags"])
            record.tags.push_back(text::to_lower(text::normalize_ws(t.get<std::string>())));
    if (task.payload.contains("mask_path")) {
        std::string mask = read_file(task.payload["mask_path"].get<std::string>());
        auto mask_info = img::probe(mask);
        if (!mask_info)
            throw TaskFailure("seed mask is not decodable: " +
                              task.payload["mask_path"].get<std::string>());
        record.mask_uri = store_->put_blob("masks", mask, img::extension(mask_info->format));
    }
    result.records.push_back(record.to_json());
    return result;
}

TaskResult Engine::variation_task(const Task& task) {
    TaskResult result;
    ImageRecord original = ImageRecord::from_json(task.payload);
    std::string image = store_->read_blob(original.uri);
    const auto& vcfg = config_.variation;

    // Acquire caption, tags, and mask where the seed data lacks them.
    if (original.caption.empty() || original.tags.empty()) {
        auto ct = client(Role::captioner).caption_and_tags(image);
        if (original.caption.empty()) original.caption = ct.caption;
        if (original.tags.empty()) original.tags = ct.tags;
    }
    std::string mask;
    if (!original.mask_uri) {
        mask = client(Role::segmenter).segment(image);
        auto info = img::probe(mask);
        original.mask_uri = store_->put_blob("masks", mask, img::extension(info->format));
    } else {
        mask = store_->read_blob(*original.mask_uri);
    }

    auto finish_excluded = [&](const std::string& reason) {
        original.status = ImageStatus::excluded;
        original.note = reason;
        result.records.push_back(original.to_json());
        return result;
    };

    if (original.tags.empty()) return finish_excluded("no object tags");
    auto targets =
        variation::choose_targets(original.tags, original.caption, vcfg.target_strategy,
                                  digest_u64(run_seed_key(config_.seed, "target|" + original.id)));
    if (targets.empty()) return finish_excluded("no tag occurs exactly once in the caption");

    int kept = 0;
    std::set<std::string> candidate_ids;
    for (const auto& target : targets) {
        variation::EditRequest request{original.caption, target, vcfg.variant_count};
        std::string edit_output = client(Role::chat).chat(
            backends::ChatPrompt{"", variation::build_edit_prompt(request)});
        auto parsed = variation::parse_variants(edit_output, vcfg.variant_count);
        if (parsed.captions.empty())
            throw TaskFailure("caption edit returned no parseable variants for " + original.id);
        if (parsed.short_count)
            log::warn("caption edit returned " + std::to_string(parsed.captions.size()) +
                      " of " + std::to_string(vcfg.variant_count) + " variants for " +
                      original.id.substr(0, 12));

        for (const auto& edited : parsed.captions) {
            VariationCandidate candidate;
            candidate.parent_id = original.id;
            candidate.edited_caption = edited;
            candidate.id = variation_candidate_id(original.id, edited);
            candidate.gate_threshold = vcfg.gate.threshold;
            if (!candidate_ids.insert(candidate.id).second) continue;  // duplicate variant

            auto spans = variation::validate_edit(original.caption, edited);
            if (!spans || text::to_lower(spans->target_span) != text::to_lower(target)) {
                candidate.decision = Decision::failed;
                candidate.note = spans ? "edit replaced '" + spans->target_span +
                                             "' instead of the target '" + target + "'"
                                       : "edit is not a single-span replacement";
                result.records.push_back(candidate.to_json());
                continue;
            }
            candidate.target_word = spans->target_span;
            candidate.replacement_phrase = spans->replacement_span;

            try {
                std::uint64_t gen_seed = digest_u64(original.id + "|" + edited);
                std::string generated =
                    client(Role::image_generator).generate_image(edited, mask, gen_seed);
                auto gen_info = img::probe(generated);
                candidate.image_uri =
                    store_->put_blob("images", generated, img::extension(gen_info->format));
                std::string question = variation::vqascore_question(edited, vcfg.gate);
                double score = client(Role::vqa_scorer).vqa_score(generated, question);
                candidate.vqa_score = score;
                if (variation::gate(score, vcfg.gate) == variation::GateDecision::kept) {
                    candidate.decision = Decision::kept;
                    ++kept;
                    ImageRecord varimg;
                    varimg.id = variation_image_id(candidate.id);
                    varimg.kind = ImageKind::variation;
                    varimg.parent_id = original.id;
                    varimg.uri = *candidate.image_uri;
                    varimg.caption = edited;
                    varimg.mask_uri = original.mask_uri;
                    varimg.status = ImageStatus::active;
                    for (const auto& tag : original.tags)
                        varimg.tags.push_back(tag == target
                                                  ? text::to_lower(candidate.replacement_phrase)
                                                  : tag);
                    result.records.push_back(varimg.to_json());
                } else {
                    candidate.decision = Decision::discarded;
                }
            } catch (const TaskFailure& e) {
                // Only the affected candidate fails; the rest of the batch
                // proceeds.
                candidate.decision = Decision::failed;
                candidate.note = e.what();
            }
            result.records.push_back(candidate.to_json());
        }
    }

    if (kept > 0) {
        original.status = ImageStatus::active;
        result.records.push_back(original.to_json());
        return result;
    }
    return finish_excluded("no kept variations");
}

TaskResult Engine::instruction_task(const Task& task) {
    TaskResult result;
    ImageRecord image = ImageRecord::from_json(task.payload);
    std::string bytes = store_->read_blob(image.uri);
    const auto& icfg = config_.instruction;

    instruction::DescriptionBundle bundle;
    bundle.image_id = image.id;
    std::vector<std::string> questions;
    try {
        bundle.description = text::normalize_ws(client(Role::describer)
                                                    .chat_about_image(
                                                        bytes, backends::ChatPrompt{
                                                                   "", icfg.describe_prompt}));
        bundle.detected_tags = client(Role::tagger).detect_tags(bytes);
        auto prompt = instruction::build_question_prompt(bundle);
        std::string output = client(Role::chat).chat(
            backends::ChatPrompt{prompt.system, prompt.user});
        questions = instruction::parse_questions(output, icfg.questions_per_image);
        if (questions.empty()) throw TaskFailure("question generation produced no questions");
    } catch (const TaskFailure& e) {
        // Per-image failures skip the image with a logged reason rather than
        // failing the stage.
        log::warn("instruction stage skipping image " + image.id.substr(0, 12) + ": " + e.what());
        image.note = std::string("instruction skipped: ") + e.what();
        result.records.push_back(image.to_json());
        return result;
    }

    auto answer_question = [&](const std::string& question, QaOrigin origin, int ordinal,
                               const std::optional<std::string>& source_image) {
        QARecord qa;
        qa.image_id = image.id;
        qa.question = question;
        qa.origin = origin;
        qa.ordinal = ordinal;
        qa.source_image_id = source_image;
        qa.id = qa_record_id(image.id, origin, question);
        try {
            qa.answer = text::normalize_ws(
                client(Role::answerer).chat_about_image(bytes, backends::ChatPrompt{"", question}));
            qa.status = QaStatus::pending;
        } catch (const TaskFailure& e) {
            qa.answer = "";
            qa.status = QaStatus::discarded;
            qa.note = std::string("answer generation failed: ") + e.what();
        }
        result.records.push_back(qa.to_json());
    };

    int ordinal = 0;
    for (const auto& q : questions) answer_question(q, QaOrigin::generated, ordinal++, {});

    if (image.kind == ImageKind::variation) {
        // Cross-apply a seeded subset of the parent's generated questions,
        // re-answered against this variation image.
        const nlohmann::json* parent = cycle_view_->view.find(*image.parent_id);
        if (parent == nullptr)
            throw TaskFailure("parent record missing for variation " + image.id);
        std::vector<std::pair<int, std::string>> parent_questions;
        for (const auto& r : cycle_view_->view.records) {
            if (r.value("type", "") != "qa") continue;
            QARecord qa = QARecord::from_json(r);
            if (qa.image_id == *image.parent_id && qa.origin == QaOrigin::generated)
                parent_questions.emplace_back(qa.ordinal, qa.question);
        }
        std::sort(parent_questions.begin(), parent_questions.end());
        std::vector<std::string> ordered;
        ordered.reserve(parent_questions.size());
        for (auto& [ord, q] : parent_questions) ordered.push_back(std::move(q));

        instruction::CrossApplyConfig cross_cfg;
        cross_cfg.fraction = icfg.cross_fraction;
        cross_cfg.seed = digest_u64(run_seed_key(config_.seed, "cross|" + image.id));
        auto selected = instruction::select_cross_questions(ordered, cross_cfg);
        int cross_ordinal = 0;
        size_t sel = 0;
        for (size_t i = 0; i < ordered.size() && sel < selected.size(); ++i) {
            if (ordered[i] != selected[sel]) continue;
            ++sel;
            answer_question(ordered[i], QaOrigin::cross_applied, cross_ordinal++,
                            image.parent_id);
        }
    }
    return result;
}

TaskResult Engine::qa_gate_task(const Task& task) {
    TaskResult result;
    QARecord qa = QARecord::from_json(task.payload);
    const nlohmann::json* image_json = cycle_view_->view.find(qa.image_id);
    if (image_json == nullptr) throw TaskFailure("image record missing for qa " + qa.id);
    ImageRecord image = ImageRecord::from_json(*image_json);
    std::string bytes = store_->read_blob(image.uri);

    qa.verdicts.clear();
    for (auto& expert : experts_)
        qa.verdicts.push_back(expert->expert_verdict(bytes, qa.question, qa.answer));
    qa.status = qagate::tally(qa.verdicts, config_.panel) == qagate::TallyDecision::retained
                    ? QaStatus::retained
                    : QaStatus::discarded;
    result.records.push_back(qa.to_json());
    return result;
}

TaskResult Engine::finalize_task(const Task&) {
    TaskResult result;
    const View& view = cycle_view_->view;

    std::map<std::string, int> kept_children;   // original id -> active variations
    std::map<std::string, int> scored_children; // original id -> scored candidates
    long candidates_scored = 0, candidates_kept = 0;
    long qa_retained = 0, qa_discarded = 0, qa_pending = 0, qa_total = 0;
    std::map<std::string, const nlohmann::json*> originals;

    for (const auto& r : view.records) {
        const std::string type = r.value("type", "");
        if (type == "image") {
            ImageRecord img = ImageRecord::from_json(r);
            if (img.kind == ImageKind::original) {
                originals[img.id] = &r;
            } else if (img.status == ImageStatus::active) {
                ++kept_children[*img.parent_id];
                if (view.find(*img.parent_id) == nullptr)
                    throw StoreError("variation " + img.id + " has unresolvable parent " +
                                     *img.parent_id);
            }
        } else if (type == "candidate") {
            VariationCandidate c = VariationCandidate::from_json(r);
            if (c.vqa_score) {
                ++candidates_scored;
                ++scored_children[c.parent_id];
            }
            if (c.decision == Decision::kept) ++candidates_kept;
            if (c.decision == Decision::pending)
                throw StoreError("pending candidate present at finalize: " + c.id);
            // Re-check the gate and edit invariants over the whole store.
            if (c.decision == Decision::kept) {
                if (!c.vqa_score || *c.vqa_score < c.gate_threshold)
                    throw StoreError("kept candidate below threshold: " + c.id);
                const nlohmann::json* parent = view.find(c.parent_id);
                if (parent == nullptr)
                    throw StoreError("candidate " + c.id + " has no parent record");
                auto spans = variation::validate_edit(
                    ImageRecord::from_json(*parent).caption, c.edited_caption);
                if (!spans)
                    throw StoreError("kept candidate fails single-span edit validation: " + c.id);
            }
        } else if (type == "qa") {
            QARecord qa = QARecord::from_json(r);
            ++qa_total;
            if (qa.status == QaStatus::retained) {
                ++qa_retained;
                if (qa.yes_count() < 2)
                    throw StoreError("retained qa with fewer than 2 yes votes: " + qa.id);
            }
            if (qa.status == QaStatus::discarded) ++qa_discarded;
            if (qa.status == QaStatus::pending) ++qa_pending;
        }
    }

    const bool qa_stage_planned =
        std::find(config_.stages.begin(), config_.stages.end(), "qa_gate") !=
        config_.stages.end();
    if (qa_stage_planned && qa_pending > 0)
        throw StoreError("refusing to finalize: " + std::to_string(qa_pending) +
                         " qa records still pending");

    long originals_kept = 0, originals_excluded = 0;
    for (const auto& [id, record] : originals) {
        ImageRecord img = ImageRecord::from_json(*record);
        const ImageStatus before = img.status;
        if (kept_children[id] > 0) {
            img.status = ImageStatus::active;
        } else {
            // Consistently low-quality generations exclude the original and
            // everything under it.
            img.status = ImageStatus::excluded;
            if (!img.note) img.note = "no kept variations";
        }
        img.status == ImageStatus::active ? ++originals_kept : ++originals_excluded;
        if (img.status != before) result.records.push_back(img.to_json());
    }

    long variations_kept = 0;
    for (const auto& [id, n] : kept_children) variations_kept += n;

    summary_ = {
        {"schema", 1},
        {"variation_images_generated", candidates_scored},
        {"variation_images_kept", variations_kept},
        {"originals_kept", originals_kept},
        {"originals_excluded", originals_excluded},
        {"images_total", originals_kept + variations_kept},
        {"qa_total", qa_total},
        {"qa_retained", qa_retained},
        {"qa_discarded", qa_discarded},
        {"qa_pass_fraction",
         qa_retained + qa_discarded > 0
             ? static_cast<double>(qa_retained) / static_cast<double>(qa_retained + qa_discarded)
             : 0.0},
    };
    write_file_atomic(config_.output_dir / "summary.json", summary_.dump(2) + "\n");
    return result;
}

}  // namespace visvar::engine
