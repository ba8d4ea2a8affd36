#pragma once

#include <vector>

#include "mrd/features.hpp"

namespace mrd {

// Cosine similarity of eps-guarded L2-normalized latents.
double hypersphere_similarity(const LatentVector& a, const LatentVector& b, double eps = 1e-8);

// N x N representational similarity matrix over views.
struct RSM {
    int n = 0;
    std::vector<double> s;  // row-major

    double at(int i, int j) const { return s[static_cast<size_t>(i) * n + j]; }
    std::vector<double> upper_triangle() const;  // off-diagonal, row-major order
};

RSM build_rsm(const std::vector<LatentVector>& latents, double eps = 1e-8);

struct RSAResult {
    double tau = 0.0;
    double p_value = 1.0;
    bool significant = false;  // p < 0.05

    static RSAResult from(double tau, double p) { return {tau, p, p < 0.05}; }
};

// Kendall tau-b with tie corrections; two-sided p from the large-sample
// normal approximation of the null variance.
RSAResult kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);

// Correlates the upper triangles of two RSMs.
RSAResult rsa(const RSM& a, const RSM& b);

struct MetamerVerdict {
    double top_sim = 0.0;
    double top_base = 0.0;
    double similarity_difference = 0.0;
    int epoch_of_top = -1;
    bool is_metamer = false;  // similarity_difference >= 0
};

// Both series are per-epoch mean-over-views similarities.
MetamerVerdict classify_metamer(const std::vector<double>& run_sims,
                                const std::vector<double>& baseline_sims);

struct ECDF {
    std::vector<double> values;  // sorted ascending
    double eval(double x) const;  // right-continuous, #(v <= x)/n
    std::vector<double> probs() const;  // i/n for each sorted sample
};

ECDF make_ecdf(std::vector<double> samples);

}  // namespace mrd
