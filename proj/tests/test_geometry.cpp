#include <doctest.h>

#include <cmath>
#include <map>

#include "mrd/errors.hpp"
#include "mrd/large_steps.hpp"
#include "mrd/rng.hpp"

using namespace mrd;

namespace {

std::vector<double> flat_positions(const Mesh& m) {
    std::vector<double> x;
    x.reserve(3 * m.positions.size());
    for (const auto& p : m.positions) {
        x.push_back(p.x);
        x.push_back(p.y);
        x.push_back(p.z);
    }
    return x;
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("laplacian rows sum to zero and lambda=0 is the identity") {
    const Mesh mesh = make_icosphere(2);
    const auto sys0 = LaplacianSystem::build(mesh, 0.0);
    const auto x = flat_positions(mesh);
    const auto u = sys0.to_differential(x);
    REQUIRE(u.size() == x.size());
    for (size_t i = 0; i < x.size(); ++i) CHECK(u[i] == doctest::Approx(x[i]).epsilon(1e-15));

    // row sums of L: A * 1 = 1 + lambda * (L * 1) = 1 when rows of L sum to 0
    const auto sys = LaplacianSystem::build(mesh, 15.0);
    std::vector<double> ones(x.size(), 1.0);
    const auto a1 = sys.to_differential(ones);
    for (double v : a1) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("laplacian solve round-trips on the s=3 icosphere at lambda=15") {
    const Mesh mesh = make_icosphere(3);
    const auto sys = LaplacianSystem::build(mesh, 15.0);
    const auto x = flat_positions(mesh);
    const auto u = sys.to_differential(x);
    const auto back = sys.from_differential(u);
    CHECK(sys.last_residual() < 1e-8);
    double rel = 0.0, nx = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        rel += (back[i] - x[i]) * (back[i] - x[i]);
        nx += x[i] * x[i];
    }
    CHECK(std::sqrt(rel / nx) < 1e-6);

    // random vectors round-trip as well (solve then multiply)
    Pcg32 rng = make_stream(5, 2);
    std::vector<double> r(x.size());
    for (auto& v : r) v = rng.next_double() * 2.0 - 1.0;
    const auto xr = sys.from_differential(r);
    const auto rr = sys.to_differential(xr);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        num += (rr[i] - r[i]) * (rr[i] - r[i]);
        den += r[i] * r[i];
    }
    CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("laplacian rejects non-manifold meshes listing offending edges") {
    Mesh open_quad = make_plane(0.0, 1.0);  // boundary edges -> not closed
    CHECK_THROWS_WITH_AS(LaplacianSystem::build(open_quad, 1.0),
                         doctest::Contains("offending"), ValidationError);
}

TEST_CASE("midpoint tessellation counts and midpoints") {
    const Mesh ico = make_icosphere(0);  // V=12, E=30, F=20
    const Mesh fine = midpoint_tessellate(ico);
    CHECK(fine.vertex_count() == 42);  // V + E
    CHECK(fine.face_count() == 80);    // 4F
    CHECK(euler_characteristic(fine) == 2);

    // original vertices unchanged
    for (int i = 0; i < ico.vertex_count(); ++i)
        CHECK(fine.positions[i] == ico.positions[i]);

    // every new vertex is an exact edge midpoint of its parent edge
    const auto edges = build_edges(ico);
    std::map<std::pair<int, int>, Vec3> midpoints;
    for (const auto& e : edges)
        midpoints[{e.v0, e.v1}] = (ico.positions[e.v0] + ico.positions[e.v1]) * 0.5;
    int matched = 0;
    for (int v = ico.vertex_count(); v < fine.vertex_count(); ++v) {
        for (const auto& [k, mp] : midpoints)
            if (length(fine.positions[v] - mp) < 1e-15) {
                ++matched;
                break;
            }
    }
    CHECK(matched == fine.vertex_count() - ico.vertex_count());

    // tessellating twice matches the s=2 icosphere combinatorially
    const Mesh fine2 = midpoint_tessellate(fine);
    CHECK(fine2.vertex_count() == 162);
    CHECK(fine2.face_count() == 320);
}

TEST_CASE("tessellation interpolates uvs at midpoints") {
    Mesh ico = make_icosphere(1);
    const Mesh fine = midpoint_tessellate(ico);
    REQUIRE(fine.has_uvs());
    CHECK(fine.uvs.size() == static_cast<size_t>(fine.vertex_count()));
}

TEST_CASE("gradient pullback through the latent map matches finite differences") {
    // f(u) = sum of squared distances of x = A^-1 u to fixed targets;
    // d f/du must equal A^-1 (d f/dx) since A is symmetric.
    const Mesh mesh = make_icosphere(1);  // V = 42
    const auto sys = LaplacianSystem::build(mesh, 5.0);
    const auto x0 = flat_positions(mesh);
    auto u = sys.to_differential(x0);

    std::vector<double> target(x0.size());
    Pcg32 rng = make_stream(12, 0);
    for (auto& v : target) v = rng.next_double();

    auto f_of_u = [&](const std::vector<double>& uu) {
        const auto x = sys.from_differential(uu);
        double s = 0.0;
        for (size_t i = 0; i < x.size(); ++i) s += (x[i] - target[i]) * (x[i] - target[i]);
        return s;
    };

    // analytic: df/dx = 2(x - t); df/du = A^-1 df/dx
    const auto x = sys.from_differential(u);
    std::vector<double> dfdx(x.size());
    for (size_t i = 0; i < x.size(); ++i) dfdx[i] = 2.0 * (x[i] - target[i]);
    const auto dfdu = sys.from_differential(dfdx);

    const double h = 1e-6;
    for (size_t i : {size_t(0), size_t(17), size_t(63), size_t(125)}) {
        auto up = u, um = u;
        up[i] += h;
        um[i] -= h;
        const double fd = (f_of_u(up) - f_of_u(um)) / (2 * h);
        CHECK(dfdu[i] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_SUITE_END();
