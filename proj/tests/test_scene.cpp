#include <doctest.h>

#include <cmath>

#include "mrd/errors.hpp"
#include "mrd/scene.hpp"

using namespace mrd;

namespace {

const char* kMinimalScene = R"json({
  "materials": { "grey": { "type": "diffuse", "albedo": [0.5, 0.5, 0.5] } },
  "meshes": [
    { "name": "ball", "material": "grey",
      "geometry": { "type": "icosphere", "subdivisions": 1 } }
  ],
  "environment": { "type": "constant", "radiance": [1, 1, 1] },
  "cameras": [
    { "origin": [0, 0, 3], "look_at": [0, 0, 0], "fov": 45, "width": 16, "height": 16 }
  ]
})json";

}  // namespace

TEST_SUITE_BEGIN("scene");

TEST_CASE("fibonacci lattice basics") {
    auto one = fibonacci_camera_origins(1, 1.0, {0, 0, 0});
    REQUIRE(one.size() == 1);
    CHECK(std::abs(length(one[0]) - 1.0) < 1e-9);

    auto pts = fibonacci_camera_origins(25, 1.0, {0, 0, 0});
    REQUIRE(pts.size() == 25);
    for (const auto& p : pts) CHECK(std::abs(length(p) - 1.0) < 1e-12);

    auto shifted = fibonacci_camera_origins(25, 2.5, {1, 2, 3});
    for (const auto& p : shifted) CHECK(std::abs(length(p - Vec3{1, 2, 3}) - 2.5) < 1e-12);
}

TEST_CASE("fibonacci lattice matches a reference golden-angle construction") {
    // independent reference: golden-angle longitude, uniform-in-cosine latitude
    const int n = 100;
    const double ga = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> ref;
    for (int i = 0; i < n; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(1.0 - y * y);
        ref.push_back({r * std::cos(ga * i), y, r * std::sin(ga * i)});
    }
    double ref_min_angle = kPi;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            ref_min_angle =
                std::min(ref_min_angle, std::acos(std::clamp(dot(ref[i], ref[j]), -1.0, 1.0)));

    const auto pts = fibonacci_camera_origins(n, 1.0, {0, 0, 0});
    double min_angle = kPi;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            min_angle =
                std::min(min_angle, std::acos(std::clamp(dot(pts[i], pts[j]), -1.0, 1.0)));
    CHECK(min_angle >= ref_min_angle - 1e-9);
    CHECK(ref_min_angle > 0.1);  // near-uniform coverage, not degenerate
}

TEST_CASE("fibonacci argument errors") {
    CHECK_THROWS_AS(fibonacci_camera_origins(0, 1.0, {0, 0, 0}), InvalidArgument);
    CHECK_THROWS_AS(fibonacci_camera_origins(4, 0.0, {0, 0, 0}), InvalidArgument);
    CHECK_THROWS_AS(fibonacci_camera_origins(4, -1.0, {0, 0, 0}), InvalidArgument);
}

TEST_CASE("fibonacci output is bit-stable across calls") {
    const auto a = fibonacci_camera_origins(64, 3.0, {0, 1, 0});
    const auto b = fibonacci_camera_origins(64, 3.0, {0, 1, 0});
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("icosphere counts and topology") {
    const Mesh ico = make_icosphere(0);
    CHECK(ico.vertex_count() == 12);
    CHECK(ico.face_count() == 20);

    const Mesh s3 = make_icosphere(3);
    CHECK(s3.vertex_count() == 642);
    CHECK(s3.face_count() == 1280);

    for (int s = 0; s <= 4; ++s) {
        const Mesh m = make_icosphere(s);
        CHECK(m.vertex_count() == 10 * (1 << (2 * s)) + 2);
        CHECK(euler_characteristic(m) == 2);
        CHECK(is_closed_manifold(m));
        for (const auto& p : m.positions) CHECK(std::abs(length(p) - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(make_icosphere(9), ResourceLimit);
}

TEST_CASE("scene load minimal config") {
    const SceneDescription scene = load_scene(kMinimalScene);
    CHECK(scene.objects.size() == 1);
    CHECK(scene.cameras.size() == 1);
    CHECK(scene.materials.size() == 1);
    CHECK(scene.objects[0].mesh.vertex_count() == 42);
}

TEST_CASE("scene load rejects out-of-range material fields") {
    const std::string cfg = R"json({
      "materials": { "m": { "type": "principled", "roughness": 1.3 } },
      "meshes": [ { "name": "b", "material": "m",
                    "geometry": { "type": "icosphere", "subdivisions": 0 } } ],
      "environment": { "type": "constant", "radiance": [1, 1, 1] },
      "cameras": [ { "origin": [0,0,3], "look_at": [0,0,0] } ]
    })json";
    CHECK_THROWS_WITH_AS(load_scene(cfg), doctest::Contains("roughness"), ValidationError);
}

TEST_CASE("scene load rejects unresolved material ids") {
    const std::string cfg = R"json({
      "materials": { "m": { "type": "diffuse" } },
      "meshes": [ { "name": "b", "material": "missing",
                    "geometry": { "type": "icosphere", "subdivisions": 0 } } ],
      "environment": { "type": "constant" },
      "cameras": [ { "origin": [0,0,3], "look_at": [0,0,0] } ]
    })json";
    CHECK_THROWS_WITH_AS(load_scene(cfg), doctest::Contains("missing"), ValidationError);
}

TEST_CASE("scene parse error carries position info") {
    CHECK_THROWS_AS(load_scene("{ not json"), ParseError);
    try {
        load_scene("{\n  \"materials\": ???\n}");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        // nlohmann reports the byte offset of the failure
        CHECK(std::string(e.what()).find("parse error") != std::string::npos);
    }
}

TEST_CASE("scene serialize round-trip") {
    SceneDescription scene = load_scene(kMinimalScene);
    scene.materials.push_back(
        {"metal", PrincipledMaterial{RGB{0.9, 0.7, 0.4}, 0.25, 1.0, 0.0, 1.5, 0.3}});
    scene.materials.push_back(
        {"check", DiffuseMaterial{CheckerboardTex{{1, 1, 1}, {0, 0, 0}, 6.0}}});
    scene.environment = make_gradient_env(8, 4, {1.5, 1.5, 1.6}, {0.8, 0.8, 0.8}, {0.2, 0.2, 0.2});
    const std::string text = serialize_scene(scene);
    const SceneDescription back = load_scene(text);
    CHECK(back == scene);
    CHECK(scene_hash(back) == scene_hash(scene));
}

TEST_CASE("fibonacci camera rig expands with defaults") {
    const std::string cfg = R"json({
      "materials": { "m": { "type": "diffuse" } },
      "meshes": [ { "name": "b", "material": "m",
                    "geometry": { "type": "icosphere", "subdivisions": 1 } } ],
      "environment": { "type": "constant" },
      "cameras": { "fibonacci": { "count": 25, "width": 32, "height": 32 } }
    })json";
    const SceneDescription scene = load_scene(cfg);
    REQUIRE(scene.cameras.size() == 25);
    // default radius: 3x bounding radius (unit icosphere -> 3)
    for (const auto& cam : scene.cameras) CHECK(std::abs(length(cam.origin) - 3.0) < 1e-9);
}

TEST_CASE("checkerboard albedo is UV parity") {
    const CheckerboardTex cb{{1, 1, 1}, {0, 0, 0}, 2.0};
    const AlbedoMap map = cb;
    CHECK(eval_albedo(map, {0.1, 0.1}) == RGB{1, 1, 1});
    CHECK(eval_albedo(map, {0.6, 0.1}) == RGB{0, 0, 0});
    CHECK(eval_albedo(map, {0.6, 0.6}) == RGB{1, 1, 1});
}

TEST_CASE("environment importance sampling integrates to total radiance") {
    // MC check: E[L(w)/pdf(w)] over the sampler equals the integral of L
    const LatLongEnv env = make_gradient_env(16, 8, {2.0, 2.0, 2.0}, {0.5, 0.5, 0.5},
                                             {0.05, 0.05, 0.05});
    const Environment e = env;
    Pcg32 rng = make_stream(7, 1);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const EnvSample s = env_sample(e, {0, 1, 0}, rng);
        if (s.pdf > 0) sum += mean_component(s.radiance) / s.pdf;
    }
    const double mc = sum / n;
    // reference: fine quadrature of the interpolated radiance field
    double ref = 0.0;
    const int nt = 400, np = 800;
    for (int it = 0; it < nt; ++it) {
        const double theta = kPi * (it + 0.5) / nt;
        const double w = std::sin(theta) * (kPi / nt) * (kTwoPi / np);
        for (int ip = 0; ip < np; ++ip) {
            const double phi = kTwoPi * (ip + 0.5) / np;
            const Vec3 dir{std::sin(theta) * std::cos(phi), std::cos(theta),
                           std::sin(theta) * std::sin(phi)};
            ref += w * mean_component(env_eval(e, dir));
        }
    }
    CHECK(mc == doctest::Approx(ref).epsilon(0.02));
}

TEST_SUITE_END();
