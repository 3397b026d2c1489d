#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "visvar/records.hpp"

namespace visvar::backends {

// The model roles the pipeline orchestrates. Every role is a swappable
// endpoint speaking one of two generic wire shapes: a chat-completion JSON
// exchange for text, or a JSON image exchange for image/score traffic.
enum class Role {
    chat,
    captioner,
    segmenter,
    image_generator,
    vqa_scorer,
    describer,
    tagger,
    answerer,
    expert_judge,
};

std::string to_string(Role role);
Role role_from_string(const std::string& s);

struct BackendProfile {
    Role role = Role::chat;
    std::string endpoint;    // http(s) URL, or "mock:" for the built-in mock
    std::string model_name;
    std::string bearer_token;  // optional; sent as Authorization: Bearer
    std::chrono::milliseconds timeout{30000};
    int max_attempts = 3;
    int max_in_flight = 4;
    std::chrono::milliseconds backoff_base{1000};
    std::chrono::milliseconds backoff_cap{30000};

    void validate(const std::string& name) const;  // throws ConfigError
};

struct BackendResponse {
    nlohmann::json payload;
    int attempts_used = 0;
    std::chrono::milliseconds latency{0};
};

struct ChatPrompt {
    std::string system;  // empty = no system message
    std::string user;
};

struct CaptionTags {
    std::string caption;
    std::vector<std::string> tags;
};

// Transient failures are retried with capped exponential backoff; permanent
// ones surface immediately.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& msg, bool transient)
        : std::runtime_error(msg), transient_(transient) {}
    bool transient() const { return transient_; }

private:
    bool transient_;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual nlohmann::json call(Role role, const nlohmann::json& body) = 0;
};

// Backoff delay before retry `attempt` (1-based count of failures so far):
// base doubling with +/-20% jitter, capped. The sequence is nondecreasing.
std::chrono::milliseconds backoff_delay(int attempt, const BackendProfile& profile,
                                        std::mt19937_64& rng);

// Bounds concurrent requests per backend role.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int limit) : limit_(limit) {}

    void acquire();
    void release();
    int max_observed() const { return max_observed_; }

    class Slot {
    public:
        explicit Slot(InFlightLimiter& l) : limiter_(l) { limiter_.acquire(); }
        ~Slot() { limiter_.release(); }
        Slot(const Slot&) = delete;
        Slot& operator=(const Slot&) = delete;

    private:
        InFlightLimiter& limiter_;
    };

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int limit_;
    int in_flight_ = 0;
    int max_observed_ = 0;
};

// Client for one backend profile. Shareable across worker threads; the
// in-flight limiter and retry loop live here.
class BackendClient {
public:
    BackendClient(BackendProfile profile, std::shared_ptr<Transport> transport);

    const BackendProfile& profile() const { return profile_; }
    InFlightLimiter& limiter() { return limiter_; }

    // Raw request/response with retry, backoff, and in-flight limiting.
    BackendResponse invoke(const nlohmann::json& body);

    std::string chat(const ChatPrompt& prompt);
    std::string chat_about_image(std::string_view image, const ChatPrompt& prompt);
    CaptionTags caption_and_tags(std::string_view image);
    std::vector<std::string> detect_tags(std::string_view image);
    std::string segment(std::string_view image);
    std::string generate_image(const std::string& caption, std::string_view mask,
                               std::uint64_t seed);
    double vqa_score(std::string_view image, const std::string& question);
    // Never throws for backend trouble: an unreachable or unparseable expert
    // abstains so the majority vote can tolerate a missing panelist.
    Verdict expert_verdict(std::string_view image, const std::string& question,
                           const std::string& answer);

private:
    std::string completion_content(const nlohmann::json& reply) const;

    BackendProfile profile_;
    std::shared_ptr<Transport> transport_;
    InFlightLimiter limiter_;
    std::mt19937_64 jitter_rng_;
    std::mutex rng_mutex_;
};

// Picks the transport from the endpoint scheme: "mock:" endpoints get the
// deterministic in-process mock, anything else speaks HTTP.
std::shared_ptr<Transport> make_transport(const BackendProfile& profile, std::uint64_t seed);

// Parses a leading yes/no token, case-insensitive, punctuation ignored.
// Anything else is an abstain; a vote is never guessed.
Vote parse_vote(std::string_view reply);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace visvar::backends
