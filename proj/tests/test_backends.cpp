#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "visvar/backends.hpp"
#include "visvar/errors.hpp"
#include "visvar/image.hpp"
#include "visvar/mock_backend.hpp"

using namespace visvar;
using namespace visvar::backends;

namespace {
BackendProfile profile_of(Role role, const std::string& endpoint = "mock:",
                          const std::string& model = "m") {
    BackendProfile p;
    p.role = role;
    p.endpoint = endpoint;
    p.model_name = model;
    p.backoff_base = std::chrono::milliseconds(1);
    p.backoff_cap = std::chrono::milliseconds(4);
    return p;
}

std::string test_image(int w = 32, int h = 24, int salt = 0) {
    return img::make_ppm(w, h, [&](int x, int y) {
        return img::Rgb{static_cast<std::uint8_t>(x + salt), static_cast<std::uint8_t>(y),
                        static_cast<std::uint8_t>(salt)};
    });
}
}  // namespace

TEST_CASE("mock outputs are pure functions of seed, role, and body") {
    auto t1 = std::make_shared<MockTransport>(42);
    auto t2 = std::make_shared<MockTransport>(42);  // separate instance, same seed
    nlohmann::json body = {{"model", "m"},
                           {"messages", {{{"role", "user"}, {"content", "hello there"}}}},
                           {"temperature", 0}};
    CHECK(t1->call(Role::chat, body) == t2->call(Role::chat, body));
    auto t3 = std::make_shared<MockTransport>(43);
    CHECK(t1->call(Role::chat, body) != t3->call(Role::chat, body));
    // role changes the output even for identical bodies
    CHECK(t1->call(Role::vqa_scorer, {{"image", "aGk="}, {"question", "q"}}) ==
          t2->call(Role::vqa_scorer, {{"image", "aGk="}, {"question", "q"}}));
}

TEST_CASE("mock vqa scores are empirically uniform on [0,1)") {
    BackendClient scorer(profile_of(Role::vqa_scorer),
                         std::make_shared<MockTransport>(7));
    std::string image = test_image();
    std::vector<double> samples;
    samples.reserve(10000);
    for (int i = 0; i < 10000; ++i)
        samples.push_back(scorer.vqa_score(image, "Does this show item " + std::to_string(i) +
                                                      "? Please answer yes or no."));
    std::sort(samples.begin(), samples.end());
    double ks = 0.0;
    const double n = static_cast<double>(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        double emp_hi = static_cast<double>(i + 1) / n;
        double emp_lo = static_cast<double>(i) / n;
        ks = std::max({ks, std::fabs(emp_hi - samples[i]), std::fabs(samples[i] - emp_lo)});
    }
    CHECK(ks < 0.02);
    CHECK(samples.front() >= 0.0);
    CHECK(samples.back() < 1.0);
}

TEST_CASE("retry stops at max_attempts and reports attempts used") {
    auto profile = profile_of(Role::chat);
    profile.max_attempts = 3;
    nlohmann::json body = {{"model", "m"},
                           {"messages", {{{"role", "user"}, {"content", "ping"}}}},
                           {"temperature", 0}};

    MockTransport::Options two_failures;
    two_failures.fail_first = 2;
    BackendClient recovers(profile, std::make_shared<MockTransport>(1, two_failures));
    auto response = recovers.invoke(body);
    CHECK(response.attempts_used == 3);
    CHECK(response.attempts_used <= profile.max_attempts);

    MockTransport::Options three_failures;
    three_failures.fail_first = 3;
    auto transport = std::make_shared<MockTransport>(1, three_failures);
    BackendClient exhausted(profile, transport);
    CHECK_THROWS_AS(exhausted.invoke(body), TaskFailure);
    CHECK(transport->total_calls() == 3);  // never exceeds max_attempts
}

TEST_CASE("endpoint options parse latency and failure injection") {
    auto opts = MockTransport::parse_endpoint("mock:?latency_ms=3&fail_first=2");
    CHECK(opts.latency.count() == 3);
    CHECK(opts.fail_first == 2);
    auto plain = MockTransport::parse_endpoint("mock:");
    CHECK(plain.latency.count() == 0);
    CHECK(plain.fail_first == 0);
}

TEST_CASE("backoff delays are nondecreasing and capped") {
    auto profile = profile_of(Role::chat);
    profile.backoff_base = std::chrono::milliseconds(1000);
    profile.backoff_cap = std::chrono::milliseconds(30000);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        long prev = 0;
        for (int attempt = 1; attempt <= 10; ++attempt) {
            long d = backoff_delay(attempt, profile, rng).count();
            CHECK(d >= prev);
            CHECK(d <= 30000);
            if (attempt == 1) {
                CHECK(d >= 800);   // base 1s with -20% jitter
                CHECK(d <= 1200);  // +20%
            }
            prev = d;
        }
    }
}

TEST_CASE("in-flight limiter bounds concurrency under load") {
    auto profile = profile_of(Role::vqa_scorer);
    profile.max_in_flight = 3;
    MockTransport::Options opts;
    opts.latency = std::chrono::milliseconds(2);
    auto transport = std::make_shared<MockTransport>(5, opts);
    BackendClient client(profile, transport);
    std::string image = test_image();

    std::vector<std::thread> threads;
    for (int t = 0; t < 16; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 4; ++i)
                client.vqa_score(image, "q" + std::to_string(t * 10 + i) + "?");
        });
    for (auto& t : threads) t.join();
    CHECK(transport->max_concurrent() <= 3);
    CHECK(client.limiter().max_observed() <= 3);
    CHECK(transport->total_calls() == 64);
}

TEST_CASE("vote parsing accepts only a leading yes or no") {
    CHECK(parse_vote("Yes") == Vote::yes);
    CHECK(parse_vote("yes, definitely") == Vote::yes);
    CHECK(parse_vote("no.") == Vote::no);
    CHECK(parse_vote(" NO ") == Vote::no);
    CHECK(parse_vote("It depends") == Vote::abstain);
    CHECK(parse_vote("") == Vote::abstain);
    CHECK(parse_vote("maybe yes") == Vote::abstain);
}

TEST_CASE("client op preconditions") {
    BackendClient chat(profile_of(Role::chat), std::make_shared<MockTransport>(1));
    CHECK_THROWS_AS(chat.chat({"", ""}), PreconditionError);
    CHECK_THROWS_AS(chat.chat({"", "   "}), PreconditionError);

    BackendClient captioner(profile_of(Role::captioner), std::make_shared<MockTransport>(1));
    CHECK_THROWS_AS(captioner.caption_and_tags("not an image"), PreconditionError);
    CHECK_THROWS_AS(captioner.caption_and_tags(""), PreconditionError);

    BackendClient segmenter(profile_of(Role::segmenter), std::make_shared<MockTransport>(1));
    CHECK_THROWS_AS(segmenter.segment(""), PreconditionError);

    BackendClient generator(profile_of(Role::image_generator),
                            std::make_shared<MockTransport>(1));
    CHECK_THROWS_AS(generator.generate_image("", test_image(), 1), PreconditionError);

    BackendClient scorer(profile_of(Role::vqa_scorer), std::make_shared<MockTransport>(1));
    CHECK_THROWS_AS(scorer.vqa_score(test_image(), ""), PreconditionError);
}

TEST_CASE("mock caption and tags obey the client contract") {
    BackendClient captioner(profile_of(Role::captioner), std::make_shared<MockTransport>(3));
    auto ct = captioner.caption_and_tags(test_image(64, 48, 1));
    CHECK_FALSE(ct.caption.empty());
    REQUIRE(ct.tags.size() >= 2);
    std::set<std::string> unique(ct.tags.begin(), ct.tags.end());
    CHECK(unique.size() == ct.tags.size());
    for (const auto& tag : ct.tags) {
        CHECK(tag == std::string(tag));  // lowercase by construction
        CHECK(ct.caption.find(tag) != std::string::npos);
    }
    // determinism across calls
    auto again = captioner.caption_and_tags(test_image(64, 48, 1));
    CHECK(again.caption == ct.caption);
    CHECK(again.tags == ct.tags);
}

TEST_CASE("mock segmentation masks match input dimensions") {
    BackendClient segmenter(profile_of(Role::segmenter), std::make_shared<MockTransport>(3));
    std::string image = test_image(48, 20);
    std::string mask = segmenter.segment(image);
    auto info = img::probe(mask);
    REQUIRE(info.has_value());
    CHECK(info->width == 48);
    CHECK(info->height == 20);
}

TEST_CASE("mock generation produces decodable bytes deterministically") {
    BackendClient generator(profile_of(Role::image_generator),
                            std::make_shared<MockTransport>(3));
    std::string mask = test_image(40, 30);
    std::string a = generator.generate_image("a zebra on sand", mask, 99);
    std::string b = generator.generate_image("a zebra on sand", mask, 99);
    CHECK(a == b);
    auto info = img::probe(a);
    REQUIRE(info.has_value());
    CHECK(info->width == 40);
    CHECK(info->height == 30);
    CHECK(generator.generate_image("a zebra on snow", mask, 99) != a);
}

TEST_CASE("expert verdict abstains when the backend is unreachable") {
    auto profile = profile_of(Role::expert_judge);
    profile.max_attempts = 1;
    MockTransport::Options always_fail;
    always_fail.fail_first = 1000;
    BackendClient expert(profile, std::make_shared<MockTransport>(1, always_fail));
    Verdict v = expert.expert_verdict(test_image(), "Is it a zebra?", "Yes, it is.");
    CHECK(v.vote == Vote::abstain);
    CHECK(v.expert_id == "m");
}

TEST_CASE("base64 round trip") {
    std::string data;
    for (int i = 0; i < 300; ++i) data.push_back(static_cast<char>(i & 0xff));
    CHECK(base64_decode(base64_encode(data)) == data);
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foo") == "Zm9v");
}
