#pragma once

#include <string>

#include "mrd/image.hpp"

namespace mrd {

enum class LossKind { MAE, DualBuffer, FeatureDistance };

struct LossSpec {
    LossKind kind = LossKind::MAE;
    bool display_space = true;   // compute pixel losses on tone-mapped images
    bool dual_unsquared = false; // unsquared dual-buffer variant
    std::string extractor_id;    // FeatureDistance only
};

double loss_mae(const HDRImage& render, const HDRImage& target);
double loss_mae(const DisplayImage& render, const DisplayImage& target);

// Mean over values of ((a - target) * (b - target))^2 for two independently
// sampled renders a, b of the same state; the unsquared variant drops the
// outer square.
double loss_dual_buffer(const HDRImage& a, const HDRImage& b, const HDRImage& target,
                        bool unsquared = false);
double loss_dual_buffer(const DisplayImage& a, const DisplayImage& b,
                        const DisplayImage& target, bool unsquared = false);

}  // namespace mrd
