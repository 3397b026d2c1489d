// Pipeline CLI: run/resume a dataset build, validate configs, render run
// reports, and score models on POPE-style yes/no probes.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "visvar/config.hpp"
#include "visvar/engine.hpp"
#include "visvar/errors.hpp"
#include "visvar/eval.hpp"
#include "visvar/log.hpp"
#include "visvar/report.hpp"
#include "visvar/util.hpp"

namespace {

using namespace visvar;

int cmd_run(const std::string& config_path) {
    RunConfig config = load_config(config_path);
    engine::Engine eng(std::move(config));
    engine::RunOutcome outcome = eng.run();
    if (!outcome.completed) {
        std::cerr << "run stopped with failed tasks; resume to retry\n";
        return static_cast<int>(ExitCode::backend_exhausted);
    }
    if (!outcome.summary.is_null()) std::cout << outcome.summary.dump(2) << "\n";
    return 0;
}

int cmd_validate(const std::string& config_path) {
    RunConfig config = load_config(config_path);
    std::cout << "config ok\n";
    std::cout << "digest: " << config.digest() << "\n";
    std::cout << config.normalized.dump(2) << "\n";
    return 0;
}

int cmd_report(const std::string& store_dir, const std::string& out_dir) {
    RecordStore store{std::filesystem::path(store_dir)};
    auto manifest = PipelineManifest::load(std::filesystem::path(store_dir) / "manifest.json");
    if (!manifest) throw Error("no manifest found under " + store_dir);
    const auto finalize_entry = manifest->entries.find("finalize/all");
    if (finalize_entry == manifest->entries.end() ||
        finalize_entry->second.state != TaskState::done)
        throw Error("store is not finalized; run the pipeline to completion first");

    double threshold = 0.6;
    const auto config_path = std::filesystem::path(store_dir) / "config.json";
    if (std::filesystem::exists(config_path)) {
        auto cfg = nlohmann::json::parse(read_file(config_path));
        threshold = cfg["variation"].value("threshold", 0.6);
    }
    auto records = engine::visible_records(store, *manifest);
    nlohmann::json rep = report::build_report(records, threshold);

    std::filesystem::path out(out_dir);
    std::filesystem::create_directories(out);
    write_file_atomic(out / "report.json", rep.dump(2) + "\n");
    std::string text = report::render_text(rep);
    write_file_atomic(out / "report.txt", text);
    std::cout << text;
    return 0;
}

struct PopeArgs {
    std::string items;
    std::string pope_file;
    std::string setting = "random";
    std::string endpoint;
    std::string model = "model-under-eval";
    std::string out;
    std::string image_root;
    int workers = 4;
    long timeout_ms = 60000;
};

int cmd_eval_pope(const PopeArgs& args) {
    std::vector<eval::PopeItem> items;
    if (!args.items.empty()) {
        items = eval::load_pope_items(args.items);
    } else if (!args.pope_file.empty()) {
        items = eval::convert_pope_release(args.pope_file,
                                           eval::pope_setting_from_string(args.setting));
    } else {
        throw ConfigError("eval pope needs --items or --pope-file");
    }
    if (items.empty()) throw ConfigError("no evaluation items loaded");

    backends::BackendProfile profile;
    profile.role = backends::Role::answerer;
    profile.endpoint = args.endpoint;
    profile.model_name = args.model;
    profile.timeout = std::chrono::milliseconds(args.timeout_ms);
    profile.max_in_flight = std::max(1, args.workers);
    profile.validate("eval endpoint");
    backends::BackendClient model(profile, backends::make_transport(profile, 0));

    eval::PopeRunOptions options;
    options.out_dir = args.out;
    options.image_root = args.image_root;
    options.workers = args.workers;
    eval::ScoreReport report = eval::run_pope_eval(items, model, options);
    std::cout << report.render_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"visvar: visual-variation instruction dataset pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string store_dir, out_dir;
    PopeArgs pope;
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    auto* run = app.add_subcommand("run", "run the pipeline (resumes an interrupted run)");
    run->add_option("--config", config_path, "run config file")->required();

    auto* resume = app.add_subcommand("resume", "resume an interrupted run");
    resume->add_option("--config", config_path, "run config file")->required();

    auto* validate = app.add_subcommand("validate-config", "parse and validate a config");
    validate->add_option("--config", config_path, "run config file")->required();

    auto* report = app.add_subcommand("report", "render the run report for a finalized store");
    report->add_option("--store", store_dir, "pipeline output directory")->required();
    report->add_option("--out", out_dir, "report output directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluation harnesses");
    auto* pope_cmd = eval_cmd->add_subcommand("pope", "POPE-style yes/no hallucination probe");
    pope_cmd->add_option("--items", pope.items, "items file (jsonl)");
    pope_cmd->add_option("--pope-file", pope.pope_file, "public POPE release file");
    pope_cmd->add_option("--setting", pope.setting, "setting for --pope-file input");
    pope_cmd->add_option("--endpoint", pope.endpoint, "model endpoint URL")->required();
    pope_cmd->add_option("--model", pope.model, "model name sent on the wire");
    pope_cmd->add_option("--out", pope.out, "transcript/results directory");
    pope_cmd->add_option("--image-root", pope.image_root, "directory image uris resolve against");
    pope_cmd->add_option("--workers", pope.workers, "parallel requests");
    pope_cmd->add_option("--timeout-ms", pope.timeout_ms, "per-request timeout");
    eval_cmd->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);
    visvar::log::set_level(verbose ? visvar::log::Level::debug : visvar::log::Level::info);

    try {
        if (run->parsed() || resume->parsed()) return cmd_run(config_path);
        if (validate->parsed()) return cmd_validate(config_path);
        if (report->parsed()) return cmd_report(store_dir, out_dir);
        if (eval_cmd->parsed()) return cmd_eval_pope(pope);
    } catch (const visvar::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
