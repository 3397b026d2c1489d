#include <doctest.h>

#include "visvar/image.hpp"

using namespace visvar::img;

TEST_CASE("ppm probe") {
    std::string p6 = make_ppm(17, 9, [](int, int) { return Rgb{1, 2, 3}; });
    auto info = probe(p6);
    REQUIRE(info.has_value());
    CHECK(info->format == Format::ppm);
    CHECK(info->width == 17);
    CHECK(info->height == 9);

    std::string with_comment = "P6\n# a comment\n10 4\n255\n" + std::string(10 * 4 * 3, 'x');
    auto commented = probe(with_comment);
    REQUIRE(commented.has_value());
    CHECK(commented->width == 10);
    CHECK(commented->height == 4);
}

TEST_CASE("png probe reads IHDR dimensions") {
    // Hand-built signature + IHDR header for a 260 x 70 image.
    std::string png("\x89PNG\r\n\x1a\n", 8);
    png += std::string("\x00\x00\x00\x0d", 4);
    png += "IHDR";
    png += std::string("\x00\x00\x01\x04", 4);  // width 260
    png += std::string("\x00\x00\x00\x46", 4);  // height 70
    png += std::string("\x08\x02\x00\x00\x00", 5);
    auto info = probe(png);
    REQUIRE(info.has_value());
    CHECK(info->format == Format::png);
    CHECK(info->width == 260);
    CHECK(info->height == 70);
}

TEST_CASE("jpeg probe walks markers to a start-of-frame") {
    std::string jpg;
    jpg += "\xff\xd8";                          // SOI
    jpg += "\xff\xe0";                          // APP0
    jpg += std::string("\x00\x04", 2);          // segment length 4
    jpg += "JF";                                // payload
    jpg += "\xff\xc0";                          // SOF0
    jpg += std::string("\x00\x11", 2);          // length
    jpg += std::string(1, '\x08');              // precision
    jpg += std::string("\x00\x30", 2);          // height 48
    jpg += std::string("\x00\x40", 2);          // width 64
    jpg += std::string(10, '\x00');
    auto info = probe(jpg);
    REQUIRE(info.has_value());
    CHECK(info->format == Format::jpeg);
    CHECK(info->width == 64);
    CHECK(info->height == 48);
}

TEST_CASE("garbage and empty inputs are rejected") {
    CHECK_FALSE(probe("").has_value());
    CHECK_FALSE(probe("not an image at all").has_value());
    CHECK_FALSE(probe("P9\n1 1\n255\n").has_value());
}

TEST_CASE("extensions") {
    CHECK(extension(Format::ppm) == "ppm");
    CHECK(extension(Format::png) == "png");
    CHECK(extension(Format::jpeg) == "jpg");
}
