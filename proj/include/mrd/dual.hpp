#pragma once

#include <array>
#include <cmath>

namespace mrd {

// Forward-mode scalar with N partial derivatives. Used to differentiate
// BSDF lobes with respect to the handful of material parameters touched at
// a shading event; sampling densities stay plain doubles.
template <int N>
struct Dual {
    double v = 0.0;
    std::array<double, N> d{};

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit by design
    static Dual seed(double value, int slot) {
        Dual r(value);
        r.d[slot] = 1.0;
        return r;
    }

    Dual operator-() const {
        Dual r(-v);
        for (int i = 0; i < N; ++i) r.d[i] = -d[i];
        return r;
    }
    Dual operator+(const Dual& o) const {
        Dual r(v + o.v);
        for (int i = 0; i < N; ++i) r.d[i] = d[i] + o.d[i];
        return r;
    }
    Dual operator-(const Dual& o) const {
        Dual r(v - o.v);
        for (int i = 0; i < N; ++i) r.d[i] = d[i] - o.d[i];
        return r;
    }
    Dual operator*(const Dual& o) const {
        Dual r(v * o.v);
        for (int i = 0; i < N; ++i) r.d[i] = d[i] * o.v + v * o.d[i];
        return r;
    }
    Dual operator/(const Dual& o) const {
        Dual r(v / o.v);
        const double inv2 = 1.0 / (o.v * o.v);
        for (int i = 0; i < N; ++i) r.d[i] = (d[i] * o.v - v * o.d[i]) * inv2;
        return r;
    }
    Dual& operator+=(const Dual& o) { *this = *this + o; return *this; }
    Dual& operator-=(const Dual& o) { *this = *this - o; return *this; }
    Dual& operator*=(const Dual& o) { *this = *this * o; return *this; }

    bool operator<(double s) const { return v < s; }
    bool operator>(double s) const { return v > s; }
};

template <int N> Dual<N> operator+(double s, const Dual<N>& a) { return Dual<N>(s) + a; }
template <int N> Dual<N> operator-(double s, const Dual<N>& a) { return Dual<N>(s) - a; }
template <int N> Dual<N> operator*(double s, const Dual<N>& a) { return Dual<N>(s) * a; }
template <int N> Dual<N> operator/(double s, const Dual<N>& a) { return Dual<N>(s) / a; }

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
    Dual<N> r(std::sqrt(a.v));
    const double s = r.v > 0.0 ? 0.5 / r.v : 0.0;
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * s;
    return r;
}

template <int N>
Dual<N> abs(const Dual<N>& a) {
    const double s = a.v < 0.0 ? -1.0 : 1.0;
    Dual<N> r(std::abs(a.v));
    for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * s;
    return r;
}

// max(a, c) with the interior subgradient at the joint.
template <int N>
Dual<N> max(const Dual<N>& a, double c) {
    return a.v >= c ? a : Dual<N>(c);
}

template <int N>
Dual<N> clamp(const Dual<N>& a, double lo, double hi) {
    if (a.v < lo) return Dual<N>(lo);
    if (a.v > hi) return Dual<N>(hi);
    return a;
}

template <int N>
Dual<N> pow5(const Dual<N>& a) {
    Dual<N> a2 = a * a;
    return a2 * a2 * a;
}

inline double pow5(double a) {
    double a2 = a * a;
    return a2 * a2 * a;
}

}  // namespace mrd
