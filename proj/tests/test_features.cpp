#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mrd/errors.hpp"
#include "mrd/features.hpp"
#include "mrd/rng.hpp"

using namespace mrd;

namespace {

DisplayImage random_display(int w, int h, uint64_t seed) {
    DisplayImage img(w, h);
    Pcg32 rng = make_stream(seed, 0);
    for (auto& v : img.data) v = rng.next_double();
    return img;
}

}  // namespace

TEST_SUITE_BEGIN("features");

TEST_CASE("pixel flatten with factor 1 is the row-major identity") {
    DisplayImage img(2, 2);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.1 * (i + 1);
    const Extractor ex = make_extractor("pixflat");
    const LatentVector z = extract(ex, img);
    REQUIRE(z.dim() == 12);
    for (int i = 0; i < 12; ++i) CHECK(z.v[i] == doctest::Approx(0.1 * (i + 1)));
}

TEST_CASE("extraction is deterministic") {
    const DisplayImage img = random_display(16, 16, 5);
    const Extractor ex = make_extractor("tinyconv");
    const LatentVector a = extract(ex, img);
    const LatentVector b = extract(ex, img);
    REQUIRE(a.dim() == 128);
    for (int i = 0; i < a.dim(); ++i) CHECK(a.v[i] == b.v[i]);
}

TEST_CASE("tinyconv latent gradient matches finite differences") {
    const Extractor ex = make_extractor("tinyconv");
    DisplayImage img = random_display(16, 16, 11);

    // probe a handful of latent components via one-hot adjoints
    Pcg32 rng = make_stream(99, 0);
    for (int probe = 0; probe < 3; ++probe) {
        const int k = static_cast<int>(rng.next_double() * 128);
        std::vector<double> dlatent(128, 0.0);
        dlatent[k] = 1.0;
        const std::vector<double> g = extract_backward(ex, img, dlatent);

        for (int rep = 0; rep < 4; ++rep) {
            const size_t pix = static_cast<size_t>(rng.next_double() * img.data.size());
            const double h = 1e-5;
            const double orig = img.data[pix];
            img.data[pix] = orig + h;
            const double up = extract(ex, img).v[k];
            img.data[pix] = orig - h;
            const double dn = extract(ex, img).v[k];
            img.data[pix] = orig;
            const double fd = (up - dn) / (2 * h);
            CHECK(std::abs(g[pix] - fd) < 1e-4);
        }
    }
}

TEST_CASE("perceptual distance properties") {
    const Extractor ex = make_extractor("perceptual");
    const DisplayImage a = random_display(16, 16, 21);
    const DisplayImage b = random_display(16, 16, 22);

    CHECK(perceptual_distance(ex, a, a) == doctest::Approx(0.0));
    const double dab = perceptual_distance(ex, a, b);
    CHECK(dab > 0.0);
    CHECK(perceptual_distance(ex, b, a) == doctest::Approx(dab).epsilon(1e-12));

    // nondecreasing along the blend a -> b at t in {0, 0.5, 1}
    DisplayImage mid(16, 16);
    for (size_t i = 0; i < mid.data.size(); ++i)
        mid.data[i] = 0.5 * (a.data[i] + b.data[i]);
    const double dmid = perceptual_distance(ex, a, mid);
    CHECK(0.0 <= dmid);
    CHECK(dmid <= dab + 1e-12);

    DisplayImage small(8, 8);
    CHECK_THROWS_AS(perceptual_distance(ex, a, small), InvalidArgument);
}

TEST_CASE("perceptual distance input gradient matches finite differences") {
    const Extractor ex = make_extractor("perceptual");
    DisplayImage a = random_display(12, 12, 31);
    const DisplayImage b = random_display(12, 12, 32);
    const std::vector<double> g = perceptual_distance_backward(ex, a, b);
    Pcg32 rng = make_stream(55, 1);
    for (int rep = 0; rep < 6; ++rep) {
        const size_t pix = static_cast<size_t>(rng.next_double() * a.data.size());
        const double h = 1e-5;
        const double orig = a.data[pix];
        a.data[pix] = orig + h;
        const double up = perceptual_distance(ex, a, b);
        a.data[pix] = orig - h;
        const double dn = perceptual_distance(ex, a, b);
        a.data[pix] = orig;
        const double fd = (up - dn) / (2 * h);
        CHECK(g[pix] == doctest::Approx(fd).epsilon(2e-3));
    }
}

TEST_CASE("weight files round-trip bit-exactly and hash stably") {
    const TinyConvNetSpec net = make_default_tinyconv(kDefaultWeightSeed);
    const auto path =
        (std::filesystem::temp_directory_path() / "mrd_weights_test.bin").string();
    save_weights(net, path);
    const TinyConvNetSpec back = load_weights(path);
    REQUIRE(back.layers.size() == net.layers.size());
    // float32 storage: values must round-trip exactly through float
    for (size_t l = 0; l < net.layers.size(); ++l)
        for (size_t i = 0; i < net.layers[l].w.size(); ++i)
            CHECK(back.layers[l].w[i] == static_cast<double>(static_cast<float>(net.layers[l].w[i])));
    CHECK(weights_hash(back) == weights_hash(load_weights(path)));
    std::remove(path.c_str());
}

TEST_CASE("frozen weights: extraction does not mutate the extractor") {
    const Extractor ex = make_extractor("tinyconv");
    const auto& net = std::get<TinyConvNetSpec>(ex.spec);
    const uint64_t before = weights_hash(net);
    const DisplayImage img = random_display(16, 16, 77);
    (void)extract(ex, img);
    (void)extract_backward(ex, img, std::vector<double>(128, 1.0));
    CHECK(weights_hash(std::get<TinyConvNetSpec>(ex.spec)) == before);
}

TEST_CASE("weight loader rejects malformed files") {
    const auto path = (std::filesystem::temp_directory_path() / "mrd_bad_weights.bin").string();
    std::ofstream f(path, std::ios::binary);
    f << "garbage";
    f.close();
    CHECK_THROWS_AS(load_weights(path), ParseError);
    std::remove(path.c_str());
}

TEST_CASE("unknown extractor id errors") {
    CHECK_THROWS_AS(make_extractor("resnet50"), InvalidArgument);
}

TEST_SUITE_END();
