// Generates a self-contained mock workspace: seed images, an input manifest,
// and a run config wired to the deterministic mock backends. Useful for
// smoke-testing the pipeline without any model endpoints.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "visvar/digest.hpp"
#include "visvar/image.hpp"

namespace fs = std::filesystem;

namespace {

std::string seed_image(std::uint64_t seed, int index) {
    std::uint64_t h = visvar::digest_u64("seed-image|" + std::to_string(seed) + "|" +
                                         std::to_string(index));
    auto channel = [&](int shift) { return static_cast<std::uint8_t>((h >> shift) & 0xff); };
    std::uint8_t r = channel(0), g = channel(8), b = channel(16);
    return visvar::img::make_ppm(64, 48, [&](int x, int y) {
        std::uint8_t stripe = static_cast<std::uint8_t>(((x / 8 + y / 8) % 2) * 60);
        return visvar::img::Rgb{static_cast<std::uint8_t>(r ^ stripe),
                                static_cast<std::uint8_t>(g + (x & 15)),
                                static_cast<std::uint8_t>(b ^ (y & 15))};
    });
}

nlohmann::json mock_profile(const std::string& model) {
    return {{"endpoint", "mock:"}, {"model", model}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate a mock pipeline workspace"};
    std::string out = "mock-workspace";
    int images = 20;
    std::uint64_t seed = 42;
    int workers = 4;
    app.add_option("--out", out, "workspace directory");
    app.add_option("--images", images, "number of seed images");
    app.add_option("--seed", seed, "run seed");
    app.add_option("--workers", workers, "max_workers in the config");
    CLI11_PARSE(app, argc, argv);

    fs::create_directories(fs::path(out) / "seeds");
    std::ofstream manifest(fs::path(out) / "input.jsonl");
    for (int i = 0; i < images; ++i) {
        std::string name = "seeds/seed_" + std::to_string(i) + ".ppm";
        std::ofstream img(fs::path(out) / name, std::ios::binary);
        img << seed_image(seed, i);
        manifest << nlohmann::json{{"uri", name}}.dump() << "\n";
    }

    nlohmann::json config = {
        {"schema", 1},
        {"seed", seed},
        {"input_manifest", "input.jsonl"},
        {"output_dir", "out"},
        {"max_workers", workers},
        {"backends",
         {{"chat", mock_profile("deepseek-chat-v2")},
          {"captioner", mock_profile("tag2text")},
          {"segmenter", mock_profile("mobilesam")},
          {"image_generator", mock_profile("controlnet-plus-plus")},
          {"vqa_scorer", mock_profile("llava-1.5-13b")},
          {"describer", mock_profile("llava-1.5-7b")},
          {"tagger", mock_profile("grounded-sam")},
          {"answerer", mock_profile("internvl-2.5-38b")}}},
        {"variation", {{"variant_count", 4}, {"threshold", 0.6}}},
        {"instruction", {{"cross_fraction", 0.5}, {"questions_per_image", 7}}},
        {"panel",
         {{"experts",
           {mock_profile("llava-1.5"), mock_profile("minicpm-v-2.6"),
            mock_profile("mplug-owl3")}},
          {"retain_min_yes", 2}}},
    };
    std::ofstream cfg(fs::path(out) / "config.json");
    cfg << config.dump(2) << "\n";

    std::cout << "wrote " << images << " seed images and config under " << out << "\n";
    std::cout << "next: visvar run --config " << out << "/config.json\n";
    return 0;
}
