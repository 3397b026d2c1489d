#include "visvar/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace visvar {

namespace {
std::array<unsigned char, 32> sha256_raw(std::string_view bytes) {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
        throw std::runtime_error("sha256 failed");
    }
    return out;
}
}  // namespace

std::string sha256_hex(std::string_view bytes) {
    static constexpr char kHex[] = "0123456789abcdef";
    auto raw = sha256_raw(bytes);
    std::string hex;
    hex.reserve(64);
    for (unsigned char b : raw) {
        hex.push_back(kHex[b >> 4]);
        hex.push_back(kHex[b & 0x0f]);
    }
    return hex;
}

std::string content_digest(const nlohmann::json& record) { return sha256_hex(record.dump()); }

std::uint64_t digest_u64(std::string_view input) {
    auto raw = sha256_raw(input);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | raw[static_cast<size_t>(i)];
    return v;
}

}  // namespace visvar
