#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "mrd/analysis.hpp"
#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

using namespace mrd;

namespace {

// Independent O(n^2) pair-counting oracle with tie corrections, including the
// tie-adjusted normal-approximation p-value.
struct BruteTau {
    double tau;
    double p;
    long long con_minus_dis;
};

BruteTau brute_kendall(const std::vector<double>& x, const std::vector<double>& y) {
    const long long n = static_cast<long long>(x.size());
    long long con = 0, dis = 0, tx = 0, ty = 0;
    for (long long i = 0; i < n; ++i)
        for (long long j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0 && dy == 0) continue;
            if (dx == 0) {
                ++tx;
            } else if (dy == 0) {
                ++ty;
            } else if (dx * dy > 0) {
                ++con;
            } else {
                ++dis;
            }
        }
    const double denom = std::sqrt(static_cast<double>(con + dis + tx)) *
                         std::sqrt(static_cast<double>(con + dis + ty));
    BruteTau out{};
    out.con_minus_dis = con - dis;
    out.tau = denom > 0 ? (con - dis) / denom : 0.0;

    // tie-group statistics
    auto groups = [&](const std::vector<double>& v) {
        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        double vt = 0, v1 = 0, v2 = 0;
        size_t i = 0;
        while (i < sorted.size()) {
            size_t j = i + 1;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i);
            vt += t * (t - 1) * (2 * t + 5);
            v1 += t * (t - 1);
            v2 += t * (t - 1) * (t - 2);
            i = j;
        }
        return std::array<double, 3>{vt, v1, v2};
    };
    const auto gx = groups(x), gy = groups(y);
    const double nn = static_cast<double>(n);
    double var = (nn * (nn - 1) * (2 * nn + 5) - gx[0] - gy[0]) / 18.0;
    var += gx[1] * gy[1] / (2.0 * nn * (nn - 1));
    if (n > 2) var += gx[2] * gy[2] / (9.0 * nn * (nn - 1) * (nn - 2));
    out.p = var > 0 ? std::erfc(std::abs((con - dis) / std::sqrt(var)) / std::sqrt(2.0)) : 1.0;
    return out;
}

LatentVector lv(std::initializer_list<double> v) {
    LatentVector z;
    z.v = v;
    return z;
}

}  // namespace

TEST_SUITE_BEGIN("analysis");

TEST_CASE("hypersphere similarity reference values") {
    CHECK(hypersphere_similarity(lv({3, 4}), lv({3, 4})) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(hypersphere_similarity(lv({1, 0}), lv({0, 1})) == doctest::Approx(0.0));
    CHECK(hypersphere_similarity(lv({1, 1}), lv({1, 0})) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    CHECK_THROWS_AS(hypersphere_similarity(lv({1, 0}), lv({1, 0, 0})), InvalidArgument);
}

TEST_CASE("hypersphere similarity is scale invariant") {
    Pcg32 rng = make_stream(42, 1);
    for (int rep = 0; rep < 20; ++rep) {
        LatentVector a, b;
        for (int i = 0; i < 16; ++i) {
            a.v.push_back(rng.next_double() * 2.0 + 0.5);
            b.v.push_back(rng.next_double() * 2.0 - 1.0);
        }
        const double base = hypersphere_similarity(a, b);
        for (double c : {2.0, 10.0}) {
            LatentVector ca;
            for (double v : a.v) ca.v.push_back(c * v);
            CHECK(std::abs(hypersphere_similarity(ca, b) - base) < 1e-6);
        }
    }
}

TEST_CASE("normalize_to_sphere behavior") {
    const auto n = normalize_to_sphere(lv({3, 4}));
    CHECK(n.v[0] == doctest::Approx(0.6).epsilon(1e-8));
    CHECK(n.v[1] == doctest::Approx(0.8).epsilon(1e-8));

    const auto z = normalize_to_sphere(lv({0, 0, 0}));
    for (double v : z.v) CHECK(v == 0.0);  // the zero vector stays at zero

    Pcg32 rng = make_stream(9, 9);
    for (int rep = 0; rep < 10; ++rep) {
        LatentVector a;
        for (int i = 0; i < 8; ++i) a.v.push_back(1.0 + rng.next_double());
        double norm = 0.0;
        for (double v : normalize_to_sphere(a).v) norm += v * v;
        norm = std::sqrt(norm);
        CHECK(norm <= 1.0 + 1e-12);
        CHECK(norm >= 1.0 - 1e-6);
    }
}

TEST_CASE("rsm construction") {
    const auto same = build_rsm({lv({1, 2, 3}), lv({1, 2, 3})});
    for (double v : same.s) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

    const auto ortho = build_rsm({lv({1, 0}), lv({0, 1})});
    CHECK(ortho.at(0, 1) == doctest::Approx(0.0));
    CHECK(ortho.at(0, 1) == ortho.at(1, 0));

    Pcg32 rng = make_stream(1, 3);
    std::vector<LatentVector> latents;
    for (int i = 0; i < 6; ++i) {
        LatentVector z;
        for (int k = 0; k < 5; ++k) z.v.push_back(rng.next_double() * 4.0 - 2.0);
        latents.push_back(z);
    }
    const RSM rsm = build_rsm(latents);
    for (int i = 0; i < rsm.n; ++i) {
        CHECK(rsm.at(i, i) == doctest::Approx(1.0).epsilon(1e-6));
        for (int j = 0; j < rsm.n; ++j) {
            CHECK(rsm.at(i, j) == rsm.at(j, i));  // exact symmetry by construction
            CHECK(rsm.at(i, j) >= -1.0 - 1e-9);
            CHECK(rsm.at(i, j) <= 1.0 + 1e-9);
        }
    }
    CHECK_THROWS_AS(build_rsm({lv({1, 0})}), InvalidArgument);
}

TEST_CASE("kendall tau perfect concordance and discordance") {
    CHECK(kendall_tau_b({1, 2, 3, 4}, {10, 20, 30, 40}).tau == doctest::Approx(1.0));
    CHECK(kendall_tau_b({1, 2, 3}, {3, 2, 1}).tau == doctest::Approx(-1.0));
}

TEST_CASE("kendall tau with ties matches the brute-force oracle") {
    const std::vector<double> x{1, 1, 2, 3}, y{1, 2, 2, 3};
    const auto got = kendall_tau_b(x, y);
    const auto want = brute_kendall(x, y);
    CHECK(got.tau == doctest::Approx(want.tau).epsilon(1e-12));
    CHECK(got.p_value == doctest::Approx(want.p).epsilon(1e-9));
}

TEST_CASE("kendall tau oracle agreement on 100 random tied vectors") {
    Pcg32 rng = make_stream(2024, 7);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 3 + static_cast<int>(rng.next_double() * 47);
        std::vector<double> x(n), y(n);
        const int levels = 2 + static_cast<int>(rng.next_double() * 8);
        for (int i = 0; i < n; ++i) {
            x[i] = std::floor(rng.next_double() * levels);
            y[i] = std::floor(rng.next_double() * levels);
        }
        BruteTau want;
        try {
            want = brute_kendall(x, y);
            if (!std::isfinite(want.tau)) continue;
        } catch (...) {
            continue;
        }
        RSAResult got;
        try {
            got = kendall_tau_b(x, y);
        } catch (const InvalidArgument&) {
            // constant input; oracle denominator is zero too
            continue;
        }
        CHECK(got.tau == doctest::Approx(want.tau).epsilon(1e-12));
        CHECK(std::abs(got.p_value - want.p) < 1e-9);
    }
}

TEST_CASE("rsa on identical and reversed rsms") {
    Pcg32 rng = make_stream(77, 0);
    std::vector<LatentVector> latents;
    for (int i = 0; i < 5; ++i) {
        LatentVector z;
        for (int k = 0; k < 6; ++k) z.v.push_back(rng.next_double() * 2.0 - 1.0);
        latents.push_back(z);
    }
    const RSM a = build_rsm(latents);
    CHECK(rsa(a, a).tau == doctest::Approx(1.0));

    // reversed ranks of the upper triangle
    RSM b = a;
    auto ut = a.upper_triangle();
    std::vector<double> sorted = ut;
    std::sort(sorted.begin(), sorted.end());
    // map each value to its mirrored rank value
    size_t k = 0;
    for (int i = 0; i < b.n; ++i)
        for (int j = i + 1; j < b.n; ++j) {
            const auto pos = std::lower_bound(sorted.begin(), sorted.end(), ut[k]) - sorted.begin();
            const double mirrored = sorted[sorted.size() - 1 - pos];
            b.s[static_cast<size_t>(i) * b.n + j] = mirrored;
            b.s[static_cast<size_t>(j) * b.n + i] = mirrored;
            ++k;
        }
    CHECK(rsa(a, b).tau == doctest::Approx(-1.0));

    // symmetry of the correlation
    CHECK(rsa(a, b).tau == rsa(b, a).tau);
    CHECK_THROWS_AS(rsa(build_rsm({lv({1, 0}), lv({0, 1})}), a), InvalidArgument);
}

TEST_CASE("significance flag flips exactly at p = 0.05") {
    CHECK(RSAResult::from(0.5, 0.049999).significant);
    CHECK_FALSE(RSAResult::from(0.5, 0.05).significant);
    CHECK_FALSE(RSAResult::from(0.5, 0.050001).significant);
}

TEST_CASE("metamer classification") {
    const auto m = classify_metamer({0.2, 0.991, 0.4}, {0.983, 0.1});
    CHECK(m.is_metamer);
    CHECK(m.similarity_difference == doctest::Approx(0.008).epsilon(1e-12));
    CHECK(m.epoch_of_top == 1);

    const auto nm = classify_metamer({0.738}, {0.758});
    CHECK_FALSE(nm.is_metamer);
    CHECK(nm.similarity_difference == doctest::Approx(-0.020).epsilon(1e-12));

    const auto eq = classify_metamer({0.5, 0.7}, {0.7, 0.5});
    CHECK(eq.is_metamer);  // difference 0 counts as metamer
    CHECK(eq.similarity_difference == 0.0);

    CHECK_THROWS_AS(classify_metamer({}, {0.1}), InvalidArgument);
}

TEST_CASE("metamer verdict is monotone in run similarities") {
    Pcg32 rng = make_stream(15, 4);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> run(10), base(10);
        for (int i = 0; i < 10; ++i) {
            run[i] = rng.next_double();
            base[i] = rng.next_double();
        }
        const auto before = classify_metamer(run, base);
        run[static_cast<size_t>(rng.next_double() * 10)] += rng.next_double();
        const auto after = classify_metamer(run, base);
        if (before.is_metamer) CHECK(after.is_metamer);
    }
}

TEST_CASE("ecdf basics") {
    const auto single = make_ecdf({0.5});
    CHECK(single.eval(0.4) == 0.0);
    CHECK(single.eval(0.5) == 1.0);

    const auto e = make_ecdf({3, 1, 2});
    CHECK(e.eval(2.0) == doctest::Approx(2.0 / 3.0));
    CHECK(e.eval(0.0) == 0.0);
    CHECK(e.eval(5.0) == 1.0);

    // nondecreasing step function with probabilities i/n
    const auto p = e.probs();
    for (size_t i = 1; i < p.size(); ++i) {
        CHECK(p[i] >= p[i - 1]);
        CHECK(e.values[i] >= e.values[i - 1]);
    }
    CHECK_THROWS_AS(make_ecdf({}), InvalidArgument);
}

TEST_SUITE_END();
