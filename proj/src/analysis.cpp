#include "mrd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mrd/errors.hpp"

namespace mrd {

double hypersphere_similarity(const LatentVector& a, const LatentVector& b, double eps) {
    if (a.dim() != b.dim())
        throw InvalidArgument("hypersphere_similarity: latent dimensions differ");
    const LatentVector an = normalize_to_sphere(a, eps);
    const LatentVector bn = normalize_to_sphere(b, eps);
    double s = 0.0;
    for (int i = 0; i < an.dim(); ++i) s += an.v[i] * bn.v[i];
    return s;
}

std::vector<double> RSM::upper_triangle() const {
    std::vector<double> v;
    v.reserve(static_cast<size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) v.push_back(at(i, j));
    return v;
}

RSM build_rsm(const std::vector<LatentVector>& latents, double eps) {
    const int n = static_cast<int>(latents.size());
    if (n < 2) throw InvalidArgument("build_rsm: need at least 2 latents");
    std::vector<LatentVector> norm(n);
    for (int i = 0; i < n; ++i) {
        if (latents[i].dim() != latents[0].dim())
            throw InvalidArgument("build_rsm: latent dimensions differ");
        norm[i] = normalize_to_sphere(latents[i], eps);
    }
    RSM rsm;
    rsm.n = n;
    rsm.s.assign(static_cast<size_t>(n) * n, 0.0);
    // each unordered pair computed once: the matrix is exactly symmetric
    for (int i = 0; i < n; ++i) {
        double self = 0.0;
        for (int k = 0; k < norm[i].dim(); ++k) self += norm[i].v[k] * norm[i].v[k];
        rsm.s[static_cast<size_t>(i) * n + i] = self;
        for (int j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < norm[i].dim(); ++k) s += norm[i].v[k] * norm[j].v[k];
            rsm.s[static_cast<size_t>(i) * n + j] = s;
            rsm.s[static_cast<size_t>(j) * n + i] = s;
        }
    }
    return rsm;
}

namespace {

// merge sort counting inversions (strict descents) in y
long long count_inversions(std::vector<double>& y, std::vector<double>& tmp, size_t lo,
                           size_t hi) {
    if (hi - lo < 2) return 0;
    const size_t mid = (lo + hi) / 2;
    long long inv = count_inversions(y, tmp, lo, mid) + count_inversions(y, tmp, mid, hi);
    size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (y[j] < y[i]) {
            inv += static_cast<long long>(mid - i);
            tmp[k++] = y[j++];
        } else {
            tmp[k++] = y[i++];
        }
    }
    while (i < mid) tmp[k++] = y[i++];
    while (j < hi) tmp[k++] = y[j++];
    std::copy(tmp.begin() + lo, tmp.begin() + hi, y.begin() + lo);
    return inv;
}

struct TieStats {
    long long pairs = 0;    // sum t(t-1)/2
    double v_t = 0.0;       // sum t(t-1)(2t+5)
    double v1_term = 0.0;   // sum t(t-1)
    double v2_term = 0.0;   // sum t(t-1)(t-2)
};

template <typename GetKey>
TieStats tie_stats(const std::vector<int>& order, const GetKey& key) {
    TieStats ts;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i + 1;
        while (j < order.size() && key(order[j]) == key(order[i])) ++j;
        const double t = static_cast<double>(j - i);
        if (t > 1) {
            ts.pairs += static_cast<long long>(t * (t - 1) / 2);
            ts.v_t += t * (t - 1) * (2 * t + 5);
            ts.v1_term += t * (t - 1);
            ts.v2_term += t * (t - 1) * (t - 2);
        }
        i = j;
    }
    return ts;
}

}  // namespace

RSAResult kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    if (n != y.size()) throw InvalidArgument("kendall_tau_b: size mismatch");
    if (n < 2) throw InvalidArgument("kendall_tau_b: need at least 2 observations");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    // tie statistics in x, y and jointly
    const TieStats tx = tie_stats(order, [&](int i) { return x[i]; });
    std::vector<int> yorder(order);
    std::sort(yorder.begin(), yorder.end(), [&](int a, int b) { return y[a] < y[b]; });
    const TieStats ty = tie_stats(yorder, [&](int i) { return y[i]; });
    long long joint_pairs = 0;
    {
        size_t i = 0;
        while (i < n) {
            size_t j = i + 1;
            while (j < n && x[order[j]] == x[order[i]] && y[order[j]] == y[order[i]]) ++j;
            const long long t = static_cast<long long>(j - i);
            joint_pairs += t * (t - 1) / 2;
            i = j;
        }
    }

    std::vector<double> yseq(n), tmp(n);
    for (size_t i = 0; i < n; ++i) yseq[i] = y[order[i]];
    const long long dis = count_inversions(yseq, tmp, 0, n);

    const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
    const long long con_minus_dis = n0 - tx.pairs - ty.pairs + joint_pairs - 2 * dis;
    const double denom =
        std::sqrt(static_cast<double>(n0 - tx.pairs)) * std::sqrt(static_cast<double>(n0 - ty.pairs));
    if (denom <= 0.0)
        throw InvalidArgument("kendall_tau_b: input is constant");
    double tau = static_cast<double>(con_minus_dis) / denom;
    tau = std::clamp(tau, -1.0, 1.0);

    // tie-adjusted null variance of (P - Q), normal approximation
    const double nn = static_cast<double>(n);
    const double v0 = nn * (nn - 1) * (2 * nn + 5);
    double var = (v0 - tx.v_t - ty.v_t) / 18.0;
    var += tx.v1_term * ty.v1_term / (2.0 * nn * (nn - 1));
    if (n > 2) var += tx.v2_term * ty.v2_term / (9.0 * nn * (nn - 1) * (nn - 2));
    double p = 1.0;
    if (var > 0.0) {
        const double z = static_cast<double>(con_minus_dis) / std::sqrt(var);
        p = std::erfc(std::abs(z) / std::sqrt(2.0));
    }
    return RSAResult::from(tau, p);
}

RSAResult rsa(const RSM& a, const RSM& b) {
    if (a.n != b.n) throw InvalidArgument("rsa: RSM sizes differ");
    if (a.n < 3) throw InvalidArgument("rsa: need at least 3 views");
    return kendall_tau_b(a.upper_triangle(), b.upper_triangle());
}

MetamerVerdict classify_metamer(const std::vector<double>& run_sims,
                                const std::vector<double>& baseline_sims) {
    if (run_sims.empty() || baseline_sims.empty())
        throw InvalidArgument("classify_metamer: empty similarity series");
    MetamerVerdict v;
    const auto it = std::max_element(run_sims.begin(), run_sims.end());
    v.top_sim = *it;
    v.epoch_of_top = static_cast<int>(it - run_sims.begin());
    v.top_base = *std::max_element(baseline_sims.begin(), baseline_sims.end());
    v.similarity_difference = v.top_sim - v.top_base;
    v.is_metamer = v.similarity_difference >= 0.0;
    return v;
}

double ECDF::eval(double x) const {
    const auto it = std::upper_bound(values.begin(), values.end(), x);
    return static_cast<double>(it - values.begin()) / static_cast<double>(values.size());
}

std::vector<double> ECDF::probs() const {
    std::vector<double> p(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        p[i] = static_cast<double>(i + 1) / static_cast<double>(values.size());
    return p;
}

ECDF make_ecdf(std::vector<double> samples) {
    if (samples.empty()) throw InvalidArgument("ecdf: empty sample set");
    std::sort(samples.begin(), samples.end());
    ECDF e;
    e.values = std::move(samples);
    return e;
}

}  // namespace mrd
