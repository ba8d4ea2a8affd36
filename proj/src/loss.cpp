#include "mrd/loss.hpp"

#include <cmath>
#include <vector>

#include "mrd/errors.hpp"

namespace mrd {

namespace {

double mae_impl(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InvalidArgument("loss_mae: image dimensions differ");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

double dual_impl(const std::vector<double>& a, const std::vector<double>& b,
                 const std::vector<double>& t, bool unsquared) {
    if (a.size() != b.size() || a.size() != t.size())
        throw InvalidArgument("loss_dual_buffer: image dimensions differ");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double p = (a[i] - t[i]) * (b[i] - t[i]);
        s += unsquared ? p : p * p;
    }
    return s / static_cast<double>(a.size());
}

}  // namespace

double loss_mae(const HDRImage& render, const HDRImage& target) {
    return mae_impl(render.data, target.data);
}

double loss_mae(const DisplayImage& render, const DisplayImage& target) {
    return mae_impl(render.data, target.data);
}

double loss_dual_buffer(const HDRImage& a, const HDRImage& b, const HDRImage& target,
                        bool unsquared) {
    return dual_impl(a.data, b.data, target.data, unsquared);
}

double loss_dual_buffer(const DisplayImage& a, const DisplayImage& b, const DisplayImage& target,
                        bool unsquared) {
    return dual_impl(a.data, b.data, target.data, unsquared);
}

}  // namespace mrd
