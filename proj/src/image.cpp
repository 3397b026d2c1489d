#include "visvar/image.hpp"

#include <cctype>

namespace visvar::img {

namespace {

std::uint32_t be32(std::string_view b, size_t off) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3]));
}

std::uint16_t be16(std::string_view b, size_t off) {
    return static_cast<std::uint16_t>((static_cast<unsigned char>(b[off]) << 8) |
                                      static_cast<unsigned char>(b[off + 1]));
}

// PNM header token reader: skips whitespace and '#' comments.
std::optional<int> pnm_int(std::string_view b, size_t& pos) {
    while (pos < b.size()) {
        char c = b[pos];
        if (c == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= b.size() || !std::isdigit(static_cast<unsigned char>(b[pos]))) return std::nullopt;
    long v = 0;
    while (pos < b.size() && std::isdigit(static_cast<unsigned char>(b[pos]))) {
        v = v * 10 + (b[pos] - '0');
        if (v > 1 << 24) return std::nullopt;
        ++pos;
    }
    return static_cast<int>(v);
}

std::optional<Info> probe_pnm(std::string_view b) {
    if (b.size() < 10 || b[0] != 'P' || (b[1] != '5' && b[1] != '6')) return std::nullopt;
    size_t pos = 2;
    auto w = pnm_int(b, pos);
    auto h = pnm_int(b, pos);
    auto maxval = pnm_int(b, pos);
    if (!w || !h || !maxval || *w <= 0 || *h <= 0) return std::nullopt;
    return Info{Format::ppm, *w, *h};
}

std::optional<Info> probe_png(std::string_view b) {
    static constexpr unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (b.size() < 24) return std::nullopt;
    for (int i = 0; i < 8; ++i)
        if (static_cast<unsigned char>(b[static_cast<size_t>(i)]) != sig[i]) return std::nullopt;
    // IHDR is required to be the first chunk.
    if (b.substr(12, 4) != "IHDR") return std::nullopt;
    return Info{Format::png, static_cast<int>(be32(b, 16)), static_cast<int>(be32(b, 20))};
}

std::optional<Info> probe_jpeg(std::string_view b) {
    if (b.size() < 4 || static_cast<unsigned char>(b[0]) != 0xff ||
        static_cast<unsigned char>(b[1]) != 0xd8)
        return std::nullopt;
    size_t pos = 2;
    while (pos + 9 < b.size()) {
        if (static_cast<unsigned char>(b[pos]) != 0xff) return std::nullopt;
        unsigned char marker = static_cast<unsigned char>(b[pos + 1]);
        if (marker == 0xff) {  // fill byte
            ++pos;
            continue;
        }
        // Start-of-frame markers carry dimensions (all except DHT/JPG/DAC).
        if (marker >= 0xc0 && marker <= 0xcf && marker != 0xc4 && marker != 0xc8 &&
            marker != 0xcc) {
            return Info{Format::jpeg, static_cast<int>(be16(b, pos + 7)),
                        static_cast<int>(be16(b, pos + 5))};
        }
        if (marker == 0xd8 || (marker >= 0xd0 && marker <= 0xd7)) {
            pos += 2;
            continue;
        }
        std::uint16_t seglen = be16(b, pos + 2);
        if (seglen < 2) return std::nullopt;
        pos += 2 + seglen;
    }
    return std::nullopt;
}

}  // namespace

std::optional<Info> probe(std::string_view bytes) {
    if (bytes.empty()) return std::nullopt;
    if (auto i = probe_png(bytes)) return i;
    if (auto i = probe_jpeg(bytes)) return i;
    if (auto i = probe_pnm(bytes)) return i;
    return std::nullopt;
}

std::string extension(Format f) {
    switch (f) {
        case Format::ppm: return "ppm";
        case Format::png: return "png";
        case Format::jpeg: return "jpg";
        case Format::unknown: break;
    }
    return "bin";
}

std::string make_ppm(int width, int height, const std::function<Rgb(int, int)>& pixel) {
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.reserve(out.size() + static_cast<size_t>(width) * static_cast<size_t>(height) * 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            Rgb p = pixel(x, y);
            out.push_back(static_cast<char>(p.r));
            out.push_back(static_cast<char>(p.g));
            out.push_back(static_cast<char>(p.b));
        }
    }
    return out;
}

}  // namespace visvar::img
