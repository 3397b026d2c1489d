#include "visvar/backends.hpp"

#include <algorithm>
#include <thread>

#include "visvar/errors.hpp"
#include "visvar/image.hpp"
#include "visvar/log.hpp"
#include "visvar/qa_gate.hpp"
#include "visvar/text.hpp"

namespace visvar::backends {

std::string to_string(Role role) {
    switch (role) {
        case Role::chat: return "chat";
        case Role::captioner: return "captioner";
        case Role::segmenter: return "segmenter";
        case Role::image_generator: return "image_generator";
        case Role::vqa_scorer: return "vqa_scorer";
        case Role::describer: return "describer";
        case Role::tagger: return "tagger";
        case Role::answerer: return "answerer";
        case Role::expert_judge: return "expert_judge";
    }
    return "chat";
}

Role role_from_string(const std::string& s) {
    static const std::pair<const char*, Role> table[] = {
        {"chat", Role::chat},
        {"captioner", Role::captioner},
        {"segmenter", Role::segmenter},
        {"image_generator", Role::image_generator},
        {"vqa_scorer", Role::vqa_scorer},
        {"describer", Role::describer},
        {"tagger", Role::tagger},
        {"answerer", Role::answerer},
        {"expert_judge", Role::expert_judge},
    };
    for (const auto& [name, role] : table)
        if (s == name) return role;
    throw ConfigError("unknown backend role: '" + s + "'");
}

void BackendProfile::validate(const std::string& name) const {
    if (endpoint.empty()) throw ConfigError("backend '" + name + "' has no endpoint");
    if (max_attempts < 1) throw ConfigError("backend '" + name + "': max_attempts must be >= 1");
    if (max_in_flight < 1) throw ConfigError("backend '" + name + "': max_in_flight must be >= 1");
    if (timeout.count() <= 0) throw ConfigError("backend '" + name + "': timeout must be > 0");
}

std::chrono::milliseconds backoff_delay(int attempt, const BackendProfile& profile,
                                        std::mt19937_64& rng) {
    double base = static_cast<double>(profile.backoff_base.count());
    for (int i = 1; i < attempt; ++i) base *= 2.0;
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    double ms = std::min(base * jitter(rng), static_cast<double>(profile.backoff_cap.count()));
    return std::chrono::milliseconds(static_cast<long>(ms));
}

void InFlightLimiter::acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    max_observed_ = std::max(max_observed_, in_flight_);
}

void InFlightLimiter::release() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

BackendClient::BackendClient(BackendProfile profile, std::shared_ptr<Transport> transport)
    : profile_(std::move(profile)),
      transport_(std::move(transport)),
      limiter_(profile_.max_in_flight),
      jitter_rng_(0xb0ff5eed) {}

BackendResponse BackendClient::invoke(const nlohmann::json& body) {
    InFlightLimiter::Slot slot(limiter_);
    auto start = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 1; attempt <= profile_.max_attempts; ++attempt) {
        try {
            nlohmann::json payload = transport_->call(profile_.role, body);
            auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            return BackendResponse{std::move(payload), attempt, latency};
        } catch (const TransportError& e) {
            last_error = e.what();
            if (!e.transient() || attempt == profile_.max_attempts) break;
            std::chrono::milliseconds delay;
            {
                std::lock_guard<std::mutex> lock(rng_mutex_);
                delay = backoff_delay(attempt, profile_, jitter_rng_);
            }
            log::warn("backend " + to_string(profile_.role) + " attempt " +
                      std::to_string(attempt) + " failed (" + last_error + "), retrying in " +
                      std::to_string(delay.count()) + "ms");
            std::this_thread::sleep_for(delay);
        }
    }
    throw TaskFailure("backend " + to_string(profile_.role) + " (" + profile_.model_name +
                      ") failed after retries: " + last_error);
}

std::string BackendClient::completion_content(const nlohmann::json& reply) const {
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw TaskFailure("backend " + to_string(profile_.role) +
                          " reply is not a chat completion: " + reply.dump().substr(0, 200));
    }
}

namespace {
nlohmann::json chat_body(const BackendProfile& profile, const ChatPrompt& prompt) {
    nlohmann::json messages = nlohmann::json::array();
    if (!prompt.system.empty())
        messages.push_back({{"role", "system"}, {"content", prompt.system}});
    messages.push_back({{"role", "user"}, {"content", prompt.user}});
    // Temperature is pinned to 0 for every pipeline call so reruns are
    // reproducible where the backend honors it.
    return {{"model", profile.model_name}, {"messages", messages}, {"temperature", 0}};
}
}  // namespace

std::string BackendClient::chat(const ChatPrompt& prompt) {
    if (text::normalize_ws(prompt.user).empty())
        throw PreconditionError("chat prompt must be non-empty");
    auto response = invoke(chat_body(profile_, prompt));
    std::string content = completion_content(response.payload);
    if (text::normalize_ws(content).empty())
        throw TaskFailure("backend " + to_string(profile_.role) + " returned empty completion");
    return content;
}

std::string BackendClient::chat_about_image(std::string_view image, const ChatPrompt& prompt) {
    if (text::normalize_ws(prompt.user).empty())
        throw PreconditionError("chat prompt must be non-empty");
    if (image.empty()) throw PreconditionError("image bytes must be non-empty");
    nlohmann::json body = chat_body(profile_, prompt);
    body["image"] = base64_encode(image);
    auto response = invoke(body);
    std::string content = completion_content(response.payload);
    if (text::normalize_ws(content).empty())
        throw TaskFailure("backend " + to_string(profile_.role) + " returned empty completion");
    return content;
}

CaptionTags BackendClient::caption_and_tags(std::string_view image) {
    if (!img::probe(image)) throw PreconditionError("image bytes are not decodable");
    auto response = invoke({{"model", profile_.model_name}, {"image", base64_encode(image)}});
    CaptionTags out;
    try {
        out.caption = text::normalize_ws(response.payload.at("caption").get<std::string>());
        if (response.payload.contains("tags"))
            for (const auto& t : response.payload["tags"])
                out.tags.push_back(text::to_lower(text::normalize_ws(t.get<std::string>())));
    } catch (const nlohmann::json::exception&) {
        throw TaskFailure("captioner reply missing caption/tags fields");
    }
    if (out.caption.empty()) throw TaskFailure("captioner returned empty caption");
    // Deduplicate, first occurrence wins.
    std::vector<std::string> deduped;
    for (auto& t : out.tags)
        if (!t.empty() && std::find(deduped.begin(), deduped.end(), t) == deduped.end())
            deduped.push_back(t);
    out.tags = std::move(deduped);
    return out;
}

std::vector<std::string> BackendClient::detect_tags(std::string_view image) {
    if (!img::probe(image)) throw PreconditionError("image bytes are not decodable");
    auto response = invoke({{"model", profile_.model_name}, {"image", base64_encode(image)}});
    std::vector<std::string> tags;
    try {
        for (const auto& t : response.payload.at("tags"))
            tags.push_back(text::to_lower(text::normalize_ws(t.get<std::string>())));
    } catch (const nlohmann::json::exception&) {
        throw TaskFailure("tagger reply missing tags field");
    }
    std::vector<std::string> deduped;
    for (auto& t : tags)
        if (!t.empty() && std::find(deduped.begin(), deduped.end(), t) == deduped.end())
            deduped.push_back(t);
    if (deduped.empty()) throw TaskFailure("tagger returned no tags");
    return deduped;
}

std::string BackendClient::segment(std::string_view image) {
    auto info = img::probe(image);
    if (!info) throw PreconditionError("image bytes are not decodable");
    auto response = invoke({{"model", profile_.model_name}, {"image", base64_encode(image)}});
    std::string mask;
    try {
        mask = base64_decode(response.payload.at("mask").get<std::string>());
    } catch (const nlohmann::json::exception&) {
        throw TaskFailure("segmenter reply missing mask field");
    }
    auto mask_info = img::probe(mask);
    if (!mask_info) throw TaskFailure("segmenter returned undecodable mask");
    if (mask_info->width != info->width || mask_info->height != info->height)
        throw TaskFailure("segmenter mask dimensions " + std::to_string(mask_info->width) + "x" +
                          std::to_string(mask_info->height) + " do not match input " +
                          std::to_string(info->width) + "x" + std::to_string(info->height));
    return mask;
}

std::string BackendClient::generate_image(const std::string& caption, std::string_view mask,
                                          std::uint64_t seed) {
    if (text::normalize_ws(caption).empty())
        throw PreconditionError("generation caption must be non-empty");
    if (!img::probe(mask)) throw PreconditionError("control mask is not decodable");
    auto response = invoke({{"model", profile_.model_name},
                            {"prompt", caption},
                            {"control_image", base64_encode(mask)},
                            {"seed", seed}});
    std::string image;
    try {
        image = base64_decode(response.payload.at("image").get<std::string>());
    } catch (const nlohmann::json::exception&) {
        throw TaskFailure("image generator reply missing image field");
    }
    if (!img::probe(image)) throw TaskFailure("image generator returned undecodable bytes");
    return image;
}

double BackendClient::vqa_score(std::string_view image, const std::string& question) {
    if (text::normalize_ws(question).empty())
        throw PreconditionError("vqa question must be non-empty");
    if (image.empty()) throw PreconditionError("image bytes must be non-empty");
    auto response = invoke({{"model", profile_.model_name},
                            {"image", base64_encode(image)},
                            {"question", question}});
    double score = 0.0;
    const auto& payload = response.payload;
    if (payload.contains("score") && payload["score"].is_number()) {
        score = payload["score"].get<double>();
    } else if (payload.contains("score") && payload["score"].is_string()) {
        try {
            score = std::stod(payload["score"].get<std::string>());
        } catch (const std::exception&) {
            throw TaskFailure("vqa scorer returned non-numeric score: " + payload["score"].dump());
        }
    } else {
        throw TaskFailure("vqa scorer reply missing numeric score");
    }
    if (score < 0.0 || score > 1.0) {
        log::warn("vqa score " + std::to_string(score) + " outside [0,1], clamping");
        score = std::clamp(score, 0.0, 1.0);
    }
    return score;
}

Verdict BackendClient::expert_verdict(std::string_view image, const std::string& question,
                                      const std::string& answer) {
    if (question.empty() || answer.empty() || image.empty())
        throw PreconditionError("expert verdict needs image, question, and answer");
    Verdict verdict;
    verdict.expert_id = profile_.model_name;
    try {
        std::string reply =
            chat_about_image(image, qagate::build_verdict_prompt(question, answer));
        verdict.vote = parse_vote(reply);
    } catch (const TaskFailure& e) {
        log::warn("expert " + profile_.model_name + " unreachable, abstaining: " + e.what());
        verdict.vote = Vote::abstain;
    }
    return verdict;
}

Vote parse_vote(std::string_view reply) {
    std::string token = text::first_alpha_token(reply);
    if (token == "yes") return Vote::yes;
    if (token == "no") return Vote::no;
    return Vote::abstain;
}

namespace {
constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(std::string_view bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < bytes.size()) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                     static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out.push_back(kB64[v & 63]);
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string base64_decode(std::string_view input) {
    std::string out;
    out.reserve(input.size() / 4 * 3);
    int buffer = 0, bits = 0;
    for (char c : input) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        int v = b64_value(c);
        if (v < 0) throw TaskFailure("invalid base64 payload");
        buffer = (buffer << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((buffer >> bits) & 0xff));
        }
    }
    return out;
}

}  // namespace visvar::backends
