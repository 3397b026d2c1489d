#include "visvar/config.hpp"

#include <algorithm>

#include "visvar/digest.hpp"
#include "visvar/errors.hpp"
#include "visvar/util.hpp"

namespace visvar {

namespace {

using backends::BackendProfile;
using backends::Role;

BackendProfile parse_profile(const nlohmann::json& j, Role role, const std::string& name) {
    if (!j.is_object()) throw ConfigError("backend '" + name + "' must be an object");
    BackendProfile p;
    p.role = role;
    p.endpoint = expand_env(j.value("endpoint", ""));
    p.model_name = j.value("model", "");
    p.bearer_token = expand_env(j.value("bearer_token", ""));
    p.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
    p.max_attempts = j.value("max_attempts", 3);
    p.max_in_flight = j.value("max_in_flight", 4);
    p.backoff_base = std::chrono::milliseconds(j.value("backoff_base_ms", 1000));
    p.backoff_cap = std::chrono::milliseconds(j.value("backoff_cap_ms", 30000));
    p.validate(name);
    if (p.model_name.empty()) throw ConfigError("backend '" + name + "' has no model name");
    return p;
}

// Only output-affecting fields enter the config digest; retry/limit/timeout
// knobs can change between resumes without invalidating the manifest.
nlohmann::json normalize_profile(const BackendProfile& p, const nlohmann::json& raw) {
    return {{"endpoint", raw.value("endpoint", "")},  // pre-expansion
            {"model", p.model_name}};
}

const std::vector<Role> kPipelineRoles = {
    Role::chat,     Role::captioner, Role::segmenter, Role::image_generator,
    Role::vqa_scorer, Role::describer, Role::tagger,    Role::answerer,
};

}  // namespace

const BackendProfile& RunConfig::backend(Role role) const {
    auto it = backend_table.find(role);
    if (it == backend_table.end())
        throw ConfigError("no backend configured for role '" + backends::to_string(role) + "'");
    return it->second;
}

std::string RunConfig::digest() const { return content_digest(normalized); }

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    const int schema = j.value("schema", 1);
    if (schema != 1) throw ConfigError("unsupported config schema version");

    RunConfig cfg;
    cfg.seed = j.value("seed", 0ULL);
    if (!j.contains("input_manifest")) throw ConfigError("config missing input_manifest");
    if (!j.contains("output_dir")) throw ConfigError("config missing output_dir");
    cfg.input_manifest = base_dir / std::filesystem::path(j["input_manifest"].get<std::string>());
    cfg.output_dir = base_dir / std::filesystem::path(j["output_dir"].get<std::string>());
    cfg.max_workers = j.value("max_workers", 4);
    if (cfg.max_workers < 1) throw ConfigError("max_workers must be >= 1");

    if (!j.contains("backends") || !j["backends"].is_object())
        throw ConfigError("config missing backends table");
    const auto& table = j["backends"];
    for (Role role : kPipelineRoles) {
        const std::string name = backends::to_string(role);
        if (!table.contains(name))
            throw ConfigError("backends table missing role '" + name + "'");
        cfg.backend_table[role] = parse_profile(table[name], role, name);
    }

    if (j.contains("variation")) {
        const auto& v = j["variation"];
        cfg.variation.variant_count = v.value("variant_count", 4);
        cfg.variation.gate.threshold = v.value("threshold", 0.6);
        if (v.contains("question_template"))
            cfg.variation.gate.question_template = v["question_template"].get<std::string>();
        cfg.variation.target_strategy =
            variation::target_strategy_from_string(v.value("target_strategy", "first_match"));
    }
    if (cfg.variation.variant_count < 1)
        throw ConfigError("variation.variant_count must be >= 1");
    if (cfg.variation.gate.threshold < 0.0 || cfg.variation.gate.threshold > 1.0)
        throw ConfigError("variation.threshold must be in [0,1]");
    if (cfg.variation.gate.question_template.find("{caption}") == std::string::npos)
        throw ConfigError("variation.question_template is missing the {caption} placeholder");

    if (j.contains("instruction")) {
        const auto& i = j["instruction"];
        cfg.instruction.cross_fraction = i.value("cross_fraction", 0.5);
        cfg.instruction.questions_per_image = i.value("questions_per_image", 7);
        cfg.instruction.describe_prompt =
            i.value("describe_prompt", cfg.instruction.describe_prompt);
    }
    if (cfg.instruction.cross_fraction < 0.0 || cfg.instruction.cross_fraction > 1.0)
        throw ConfigError("instruction.cross_fraction must be in [0,1]");
    if (cfg.instruction.questions_per_image < 1)
        throw ConfigError("instruction.questions_per_image must be >= 1");
    if (cfg.instruction.describe_prompt.empty())
        throw ConfigError("instruction.describe_prompt must be non-empty");

    if (!j.contains("panel") || !j["panel"].contains("experts"))
        throw ConfigError("config missing panel.experts");
    {
        const auto& experts = j["panel"]["experts"];
        if (!experts.is_array()) throw ConfigError("panel.experts must be an array");
        for (size_t i = 0; i < experts.size(); ++i)
            cfg.panel.experts.push_back(parse_profile(
                experts[i], Role::expert_judge, "panel.experts[" + std::to_string(i) + "]"));
        cfg.panel.retain_min_yes = j["panel"].value("retain_min_yes", 2);
        cfg.panel.validate();
    }

    cfg.stages = kCanonicalStages;
    if (j.contains("stages")) {
        std::vector<std::string> requested = j["stages"].get<std::vector<std::string>>();
        for (const auto& s : requested)
            if (std::find(kCanonicalStages.begin(), kCanonicalStages.end(), s) ==
                kCanonicalStages.end())
                throw ConfigError("unknown stage '" + s + "' in stages list");
        // Keep canonical DAG order regardless of listing order.
        cfg.stages.clear();
        for (const auto& s : kCanonicalStages)
            if (std::find(requested.begin(), requested.end(), s) != requested.end())
                cfg.stages.push_back(s);
    }

    // Canonical form for the config digest: defaults materialized, key order
    // fixed by the JSON object representation.
    nlohmann::json backends_norm = nlohmann::json::object();
    for (Role role : kPipelineRoles) {
        const std::string name = backends::to_string(role);
        backends_norm[name] = normalize_profile(cfg.backend_table[role], table[name]);
    }
    nlohmann::json experts_norm = nlohmann::json::array();
    for (size_t i = 0; i < cfg.panel.experts.size(); ++i)
        experts_norm.push_back(
            normalize_profile(cfg.panel.experts[i], j["panel"]["experts"][i]));
    cfg.normalized = {
        {"schema", 1},
        {"seed", cfg.seed},
        {"input_manifest", j["input_manifest"].get<std::string>()},
        {"backends", backends_norm},
        {"variation",
         {{"variant_count", cfg.variation.variant_count},
          {"threshold", cfg.variation.gate.threshold},
          {"question_template", cfg.variation.gate.question_template},
          {"target_strategy", variation::to_string(cfg.variation.target_strategy)}}},
        {"instruction",
         {{"cross_fraction", cfg.instruction.cross_fraction},
          {"questions_per_image", cfg.instruction.questions_per_image},
          {"describe_prompt", cfg.instruction.describe_prompt}}},
        {"panel", {{"experts", experts_norm}, {"retain_min_yes", cfg.panel.retain_min_yes}}},
    };
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(j, path.parent_path());
}

}  // namespace visvar
