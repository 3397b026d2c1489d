#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "visvar/backends.hpp"
#include "visvar/instruction.hpp"
#include "visvar/qa_gate.hpp"
#include "visvar/variation.hpp"

namespace visvar {

struct VariationStageConfig {
    int variant_count = 4;
    variation::GateConfig gate;
    variation::TargetStrategy target_strategy = variation::TargetStrategy::first_match;
};

struct InstructionStageConfig {
    double cross_fraction = 0.5;
    int questions_per_image = 7;
    std::string describe_prompt = "Describe this image in detail.";
};

// Effective run configuration. `normalized` is the canonical JSON the config
// digest is computed from: defaults materialized, keys sorted, credential
// placeholders left unexpanded so rotating a token does not invalidate a
// manifest.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path input_manifest;
    std::filesystem::path output_dir;
    int max_workers = 4;
    std::map<backends::Role, backends::BackendProfile> backend_table;
    VariationStageConfig variation;
    InstructionStageConfig instruction;
    qagate::PanelConfig panel;
    std::vector<std::string> stages;  // canonical order, possibly a prefix
    nlohmann::json normalized;

    const backends::BackendProfile& backend(backends::Role role) const;  // throws ConfigError
    std::string digest() const;
};

// Parses and validates; relative paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

inline const std::vector<std::string> kCanonicalStages = {"ingest", "variation", "instruction",
                                                          "qa_gate", "finalize"};

}  // namespace visvar
