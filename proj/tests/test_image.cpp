#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mrd/errors.hpp"
#include "mrd/image.hpp"
#include "mrd/rng.hpp"

using namespace mrd;

TEST_SUITE_BEGIN("image");

TEST_CASE("tonemap fixed points and reference values") {
    HDRImage img(2, 2);
    img.set_pixel(0, 0, {0.0, 1.0, 1e6});
    img.set_pixel(1, 0, {0.5, 2.0, 0.001});
    const DisplayImage d = tonemap(img);

    CHECK(d.pixel(0, 0).x == 0.0);
    // x=1 -> Reinhard 0.5 -> sRGB(0.5) = 1.055*0.5^(1/2.4) - 0.055
    const double expected = 1.055 * std::pow(0.5, 1.0 / 2.4) - 0.055;
    CHECK(d.pixel(0, 0).y == doctest::Approx(expected).epsilon(1e-12));
    CHECK(d.pixel(0, 0).y == doctest::Approx(0.7354).epsilon(1e-3));
    // huge input stays below 1 but above sRGB(0.999)
    CHECK(d.pixel(0, 0).z < 1.0);
    CHECK(d.pixel(0, 0).z >= srgb_encode(0.999));
}

TEST_CASE("tonemap rejects non-finite input naming the pixel") {
    HDRImage img(3, 2);
    img.set_pixel(2, 1, {0.0, std::nan(""), 0.0});
    CHECK_THROWS_WITH_AS(tonemap(img), doctest::Contains("(2, 1)"), ValidationError);
}

TEST_CASE("tonemap is monotone per channel") {
    Pcg32 rng = make_stream(11, 0);
    for (int i = 0; i < 200; ++i) {
        double a = rng.next_double() * 20.0;
        double b = rng.next_double() * 20.0;
        if (a > b) std::swap(a, b);
        CHECK(srgb_encode(reinhard(a)) <= srgb_encode(reinhard(b)) + 1e-15);
    }
}

TEST_CASE("tonemap derivative matches finite differences") {
    for (double x : {0.001, 0.01, 0.3, 1.0, 4.0}) {
        const double h = 1e-6;
        const double fd =
            (srgb_encode(reinhard(x + h)) - srgb_encode(reinhard(x - h))) / (2 * h);
        CHECK(tonemap_derivative(x) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("pfm round-trip") {
    HDRImage img(5, 3);
    Pcg32 rng = make_stream(3, 9);
    for (auto& v : img.data) v = rng.next_double() * 10.0;
    const std::string path =
        (std::filesystem::temp_directory_path() / "mrd_test_roundtrip.pfm").string();
    write_pfm(img, path);
    const HDRImage back = read_pfm(path);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-7));
    std::remove(path.c_str());
}

TEST_CASE("png writer emits a decodable signature and deterministic bytes") {
    DisplayImage img(4, 4);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = (i % 7) / 7.0;
    const auto dir = std::filesystem::temp_directory_path();
    const std::string p1 = (dir / "mrd_a.png").string(), p2 = (dir / "mrd_b.png").string();
    write_png(img, p1);
    write_png(img, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(b1.size() > 8);
    CHECK(b1 == b2);
    CHECK(static_cast<unsigned char>(b1[0]) == 137);
    CHECK(b1.substr(1, 3) == "PNG");
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_SUITE_END();
