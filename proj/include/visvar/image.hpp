#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace visvar::img {

enum class Format { ppm, png, jpeg, unknown };

struct Info {
    Format format = Format::unknown;
    int width = 0;
    int height = 0;
};

// Sniffs the header of PPM (P6/P5), PNG, and JPEG byte streams and reports
// pixel dimensions. Returns nullopt for anything it cannot identify.
std::optional<Info> probe(std::string_view bytes);

// Extension (without dot) for content-addressed image files.
std::string extension(Format f);

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

// Binary P6 image; `pixel` is called per (x, y).
std::string make_ppm(int width, int height, const std::function<Rgb(int, int)>& pixel);

}  // namespace visvar::img
