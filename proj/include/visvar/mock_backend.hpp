#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>

#include "visvar/backends.hpp"

namespace visvar::backends {

// Deterministic in-process stand-in for every model role. Outputs are pure
// functions of (global seed, role, model name, request body), so reruns and
// cross-process replays produce identical bytes. It parses the same JSON
// wire bodies the HTTP transport sends and answers in the formats the stage
// parsers expect: single-span caption edits, '&'-prefixed question lines,
// bare yes/no verdicts, uniform [0,1) scores, PPM image bytes.
class MockTransport : public Transport {
public:
    struct Options {
        std::chrono::milliseconds latency{0};
        int fail_first = 0;  // first N calls fail transiently (retry testing)
    };

    // Endpoint syntax: "mock:" or "mock:?latency_ms=2&fail_first=1".
    static Options parse_endpoint(const std::string& endpoint);

    explicit MockTransport(std::uint64_t seed);
    MockTransport(std::uint64_t seed, Options options);

    nlohmann::json call(Role role, const nlohmann::json& body) override;

    // Concurrency instrumentation for limiter tests.
    int max_concurrent() const { return max_concurrent_.load(); }
    long total_calls() const { return total_calls_.load(); }

private:
    std::uint64_t seed_;
    Options options_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_concurrent_{0};
    std::atomic<long> total_calls_{0};
    std::atomic<int> failures_left_;
};

}  // namespace visvar::backends
