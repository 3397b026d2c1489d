#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "visvar/backends.hpp"
#include "visvar/config.hpp"
#include "visvar/manifest.hpp"
#include "visvar/store.hpp"

namespace visvar::engine {

struct Task {
    std::string stage;
    std::string key;           // record id, or "all" for single-task stages
    std::string input_digest;
    int wave = 1;              // instruction stage: originals first, then variations
    nlohmann::json payload;    // stage-specific planning data
};

struct TaskResult {
    std::vector<nlohmann::json> records;
    std::string failure;  // non-empty marks the task failed (retried next run)
};

struct RunStats {
    int max_parallel_tasks = 0;
    long tasks_run = 0;
    long tasks_skipped = 0;
    long tasks_failed = 0;
};

struct RunOutcome {
    bool completed = false;
    RunStats stats;
    nlohmann::json summary;  // finalize summary, when that stage ran
};

// Latest version per id, restricted to versions committed by tasks whose
// manifest entry is done. Half-committed output stays invisible.
std::vector<nlohmann::json> visible_records(const RecordStore& store,
                                            const PipelineManifest& manifest);

// The run engine: stage DAG (ingest -> variation -> instruction -> qa_gate
// -> finalize), manifest checkpointing, bounded parallel execution with a
// single serializing committer. Reruns skip completed tasks; a killed run
// resumed with the same config reproduces the uninterrupted store byte for
// byte under mock backends.
class Engine {
public:
    explicit Engine(RunConfig config);

    // Pending tasks for one stage given current store state, sorted by key.
    std::vector<Task> plan_stage(const std::string& stage);
    // Pending tasks across all currently plannable stages, DAG order.
    std::vector<Task> plan_all();

    RunOutcome run();

    RecordStore& store() { return *store_; }
    const PipelineManifest& manifest() const { return manifest_; }
    const RunConfig& config() const { return config_; }

private:
    TaskResult execute_task(const Task& task);
    TaskResult ingest_task(const Task& task);
    TaskResult variation_task(const Task& task);
    TaskResult instruction_task(const Task& task);
    TaskResult qa_gate_task(const Task& task);
    TaskResult finalize_task(const Task& task);

    void run_tasks(std::vector<Task> tasks);
    void commit_task(const Task& task, TaskResult result);

    backends::BackendClient& client(backends::Role role);

    RunConfig config_;
    std::unique_ptr<RecordStore> store_;
    PipelineManifest manifest_;
    std::filesystem::path manifest_path_;
    std::map<backends::Role, std::unique_ptr<backends::BackendClient>> clients_;
    std::vector<std::unique_ptr<backends::BackendClient>> experts_;
    std::shared_ptr<struct EngineView> cycle_view_;  // read-only snapshot per cycle
    RunStats stats_;
    nlohmann::json summary_;
};

}  // namespace visvar::engine
