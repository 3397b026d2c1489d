#include "visvar/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "visvar/digest.hpp"
#include "visvar/errors.hpp"
#include "visvar/image.hpp"
#include "visvar/text.hpp"

namespace visvar::backends {

namespace {

// Disjoint word pools keep whole-word target matching unambiguous: caption
// words never collide with replacement words.
const std::vector<std::string> kAdjectives = {"large", "small",   "young", "spotted",
                                              "striped", "tall", "lone",  "quiet"};
const std::vector<std::string> kAnimals = {"zebra",    "horse", "giraffe", "elephant",
                                           "antelope", "bison", "camel",   "donkey"};
const std::vector<std::string> kScenes = {"field",    "valley",   "plain",    "clearing",
                                          "riverbank", "hillside", "pasture", "flatland"};
const std::vector<std::string> kGrounds = {"grass", "sand", "gravel", "snow",
                                           "mud",   "clay", "moss",   "straw"};
const std::vector<std::string> kMods = {"golden", "crimson", "emerald", "dusty",
                                        "frosty", "velvet",  "amber",   "shadowy"};
const std::vector<std::string> kNouns = {"terrain", "thicket", "grove",  "mound",
                                         "hollow",  "outcrop", "meadow", "scrub"};
const std::vector<std::string> kExtras = {"rock", "tree", "cloud",  "bush",
                                          "stone", "log", "branch", "puddle"};
const std::vector<std::string> kHallucinated = {"bench", "fence", "kite",  "bucket",
                                                "ladder", "basket", "wagon", "lantern"};
const std::vector<std::string> kColors = {"brown", "gray", "white", "black",
                                          "beige", "tan",  "cream", "silver"};

// Derives values from a fixed key; every draw is salted so outputs are
// independent of call order.
class Draw {
public:
    explicit Draw(std::string key) : key_(std::move(key)) {}

    std::uint64_t u64(const std::string& salt) const { return digest_u64(key_ + "|" + salt); }

    double uniform(const std::string& salt) const {
        return static_cast<double>(u64(salt)) / 18446744073709551616.0;  // 2^64
    }

    const std::string& pick(const std::vector<std::string>& pool, const std::string& salt) const {
        return pool[u64(salt) % pool.size()];
    }

private:
    std::string key_;
};

std::string image_from_body(const nlohmann::json& body, const char* field = "image") {
    if (!body.contains(field)) return {};
    return base64_decode(body[field].get<std::string>());
}

std::string user_message(const nlohmann::json& body) {
    if (!body.contains("messages")) return {};
    std::string user;
    for (const auto& m : body["messages"])
        if (m.value("role", "") == "user") user = m.value("content", "");
    return user;
}

// Extracts the block between `marker` and the next label line in a prompt's
// Input section.
std::string slot_after(const std::string& prompt, const std::string& marker,
                       const std::string& next_label) {
    size_t input = prompt.rfind("Input:");
    size_t start = prompt.find(marker, input == std::string::npos ? 0 : input);
    if (start == std::string::npos) return {};
    start += marker.size();
    size_t end = next_label.empty() ? std::string::npos : prompt.find(next_label, start);
    std::string block = end == std::string::npos ? prompt.substr(start)
                                                 : prompt.substr(start, end - start);
    return text::normalize_ws(block);
}

nlohmann::json completion(const std::string& content) {
    return {{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
}

// Caption-edit request: replace the target word with N distinct enriched
// phrases, one sentence per line.
nlohmann::json answer_edit_prompt(const Draw& draw, const std::string& prompt) {
    std::string word = slot_after(prompt, "Words:\n", "Sentence:");
    std::string sentence = slot_after(prompt, "Sentence:\n", "");
    std::vector<std::string> lines;
    std::vector<std::string> used;
    for (int i = 0; i < 4; ++i) {
        std::string salt = "edit" + std::to_string(i);
        size_t combo = draw.u64(salt) % (kMods.size() * kNouns.size());
        std::string phrase;
        do {
            phrase = kMods[combo / kNouns.size()] + " " + kNouns[combo % kNouns.size()];
            combo = (combo + 1) % (kMods.size() * kNouns.size());
        } while (std::find(used.begin(), used.end(), phrase) != used.end());
        used.push_back(phrase);
        auto replaced = text::replace_whole_word_once(sentence, word, phrase);
        if (replaced) lines.push_back(*replaced);
    }
    return completion(text::join(lines, "\n"));
}

nlohmann::json answer_question_prompt(const std::string& prompt) {
    std::string entries_block = slot_after(prompt, "Entries:\n", "");
    std::vector<std::string> entries = text::split_words(entries_block);
    if (entries.empty()) entries = {"object"};
    auto e = [&](size_t i) { return entries[i % entries.size()]; };
    std::vector<std::string> qs = {
        "&Is there a " + e(0) + " in the image?",
        "&What color is the " + e(1) + "?",
        "&How many " + e(0) + " are visible in the image?",
        "&Is the " + e(0) + " near the " + e(1) + "?",
        "&Does the image show a " + e(2) + "?",
        "&Is the " + e(0) + " in the foreground or the background?",
        "&Are there any people in the image?",
    };
    return completion(text::join(qs, "\n"));
}

nlohmann::json answer_describe(const Draw& draw, const std::string& image) {
    Draw img(sha256_hex(image));
    std::string animal = img.pick(kAnimals, "animal");
    std::string scene = img.pick(kScenes, "scene");
    std::string ground = img.pick(kGrounds, "ground");
    std::string adj = img.pick(kAdjectives, "adj");
    std::string halluc = draw.pick(kHallucinated, "halluc");
    std::string desc = "The image shows a " + adj + " " + animal + " standing in a " + scene +
                       ". The ground is covered with " + ground + ". A " + halluc +
                       " can be seen near the edge of the scene.";
    return completion(desc);
}

std::string question_subject(const std::string& question) {
    auto words = text::split_words(text::to_lower(question));
    for (size_t i = 0; i + 1 < words.size(); ++i) {
        if (words[i] == "a" || words[i] == "the") {
            std::string w = words[i + 1];
            while (!w.empty() && !std::isalnum(static_cast<unsigned char>(w.back()))) w.pop_back();
            if (!w.empty() && w != "image" && w != "foreground" && w != "background") return w;
        }
    }
    return "object";
}

nlohmann::json answer_generic_question(const Draw& draw, const std::string& question) {
    std::string subject = question_subject(question);
    std::string lower = text::to_lower(question);
    std::string reply;
    if (lower.find("what color") == 0) {
        reply = "The " + subject + " is " + draw.pick(kColors, "color") + ".";
    } else if (lower.find("how many") == 0) {
        reply = "There are " + std::to_string(2 + draw.u64("count") % 4) + " " + subject +
                " visible in the image.";
    } else if (lower.find("foreground or the background") != std::string::npos) {
        reply = "The " + subject + " is in the " +
                (draw.uniform("fg") < 0.5 ? std::string("foreground") : std::string("background")) +
                " of the image.";
    } else if (draw.uniform("yesno") < 0.55) {
        reply = "Yes, the " + subject + " is clearly visible in the image.";
    } else {
        reply = "No, there is no " + subject + " visible in the image.";
    }
    return completion(reply);
}

nlohmann::json answer_verdict(const Draw& draw) {
    double u = draw.uniform("verdict");
    if (u < 0.70) return completion("Yes");
    if (u < 0.97) return completion("No");
    return completion("It depends on the viewing angle.");
}

nlohmann::json answer_chat(const Draw& draw, const nlohmann::json& body) {
    std::string prompt = user_message(body);
    if (prompt.find("Replace one word in the given list") != std::string::npos)
        return answer_edit_prompt(draw, prompt);
    if (prompt.find("come up with seven questions") != std::string::npos)
        return answer_question_prompt(prompt);
    if (prompt.find("Verify whether the 'answer'") != std::string::npos)
        return answer_verdict(draw);
    if (prompt.find("Describe this image") != std::string::npos)
        return answer_describe(draw, image_from_body(body));
    // Bare question against an image: the answerer path.
    if (body.contains("image")) return answer_generic_question(draw, prompt);
    return completion("Understood: " + text::normalize_ws(prompt).substr(0, 120));
}

nlohmann::json answer_caption(const std::string& image) {
    Draw img(sha256_hex(image));
    std::string animal = img.pick(kAnimals, "animal");
    std::string scene = img.pick(kScenes, "scene");
    std::string ground = img.pick(kGrounds, "ground");
    std::string adj = img.pick(kAdjectives, "adj");
    std::string caption = "a " + adj + " " + animal + " standing in a " + scene + " of " + ground;
    return {{"caption", caption}, {"tags", {animal, ground}}};
}

nlohmann::json answer_tags(const std::string& image) {
    Draw img(sha256_hex(image));
    return {{"tags",
             {img.pick(kAnimals, "animal"), img.pick(kGrounds, "ground"),
              img.pick(kExtras, "extra")}}};
}

nlohmann::json answer_segment(const std::string& image) {
    auto info = img::probe(image);
    if (!info) throw TransportError("mock segmenter: undecodable image", false);
    Draw img_draw(sha256_hex(image));
    int w = info->width, h = info->height;
    int rx = static_cast<int>(img_draw.u64("rx") % std::max(1, w / 2));
    int ry = static_cast<int>(img_draw.u64("ry") % std::max(1, h / 2));
    int rw = std::max(1, w / 4), rh = std::max(1, h / 4);
    std::string mask = img::make_ppm(w, h, [&](int x, int y) {
        bool inside = x >= rx && x < rx + rw && y >= ry && y < ry + rh;
        std::uint8_t v = inside ? 255 : 0;
        return img::Rgb{v, v, v};
    });
    return {{"mask", base64_encode(mask)}};
}

nlohmann::json answer_generate(const nlohmann::json& body) {
    std::string mask = image_from_body(body, "control_image");
    auto info = img::probe(mask);
    if (!info) throw TransportError("mock generator: undecodable control image", false);
    Draw draw(sha256_hex(body.value("prompt", "") + "|" + std::to_string(body.value("seed", 0ULL)) +
                         "|" + sha256_hex(mask)));
    std::uint8_t r1 = static_cast<std::uint8_t>(draw.u64("r1") % 256);
    std::uint8_t g1 = static_cast<std::uint8_t>(draw.u64("g1") % 256);
    std::uint8_t b1 = static_cast<std::uint8_t>(draw.u64("b1") % 256);
    std::string image = img::make_ppm(info->width, info->height, [&](int x, int y) {
        // Horizontal bands over a base tone; keeps files small and distinct.
        std::uint8_t band = static_cast<std::uint8_t>(((y / 8) % 2) * 40);
        return img::Rgb{static_cast<std::uint8_t>((r1 + band) % 256),
                        static_cast<std::uint8_t>((g1 + x % 16) % 256),
                        static_cast<std::uint8_t>((b1 + band) % 256)};
    });
    return {{"image", base64_encode(image)}};
}

nlohmann::json answer_score(const Draw& draw) { return {{"score", draw.uniform("vqascore")}}; }

}  // namespace

MockTransport::Options MockTransport::parse_endpoint(const std::string& endpoint) {
    Options options;
    size_t q = endpoint.find('?');
    if (q == std::string::npos) return options;
    std::string query = endpoint.substr(q + 1);
    size_t pos = 0;
    while (pos < query.size()) {
        size_t amp = query.find('&', pos);
        if (amp == std::string::npos) amp = query.size();
        std::string kv = query.substr(pos, amp - pos);
        size_t eq = kv.find('=');
        if (eq != std::string::npos) {
            std::string key = kv.substr(0, eq);
            long value = std::atol(kv.substr(eq + 1).c_str());
            if (key == "latency_ms") options.latency = std::chrono::milliseconds(value);
            if (key == "fail_first") options.fail_first = static_cast<int>(value);
        }
        pos = amp + 1;
    }
    return options;
}

MockTransport::MockTransport(std::uint64_t seed) : MockTransport(seed, Options{}) {}

MockTransport::MockTransport(std::uint64_t seed, Options options)
    : seed_(seed), options_(options), failures_left_(options.fail_first) {}

nlohmann::json MockTransport::call(Role role, const nlohmann::json& body) {
    total_calls_.fetch_add(1);
    int now = in_flight_.fetch_add(1) + 1;
    int seen = max_concurrent_.load();
    while (now > seen && !max_concurrent_.compare_exchange_weak(seen, now)) {
    }
    struct Guard {
        std::atomic<int>& gauge;
        ~Guard() { gauge.fetch_sub(1); }
    } guard{in_flight_};

    if (options_.latency.count() > 0) std::this_thread::sleep_for(options_.latency);
    if (failures_left_.load() > 0 && failures_left_.fetch_sub(1) > 0)
        throw TransportError("mock transient failure", true);

    Draw draw(std::to_string(seed_) + "|" + to_string(role) + "|" + sha256_hex(body.dump()));
    switch (role) {
        case Role::chat:
        case Role::describer:
        case Role::answerer:
        case Role::expert_judge: return answer_chat(draw, body);
        case Role::captioner: return answer_caption(image_from_body(body));
        case Role::tagger: return answer_tags(image_from_body(body));
        case Role::segmenter: return answer_segment(image_from_body(body));
        case Role::image_generator: return answer_generate(body);
        case Role::vqa_scorer: return answer_score(draw);
    }
    throw TransportError("mock: unhandled role", false);
}

}  // namespace visvar::backends
