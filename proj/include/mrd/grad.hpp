#pragma once

#include "mrd/features.hpp"
#include "mrd/loss.hpp"
#include "mrd/params.hpp"
#include "mrd/render.hpp"

namespace mrd {

// Per-view ground-truth data. `latent` is only needed by latent feature
// losses, `display`/`hdr` by pixel losses and the perceptual score.
struct LossTarget {
    HDRImage hdr;
    DisplayImage display;
    LatentVector latent;
};

struct GradRenderResult {
    HDRImage image;  // first buffer of the forward render
    double loss = 0.0;
    GradientSet grads;
    RenderStats stats;
};

// Forward render + loss + d(loss)/d(params). Interior derivatives come from
// replaying the forward sample streams and differentiating path contributions
// with sampling densities detached; vertex positions additionally receive a
// boundary term from silhouette-edge sampling as seen from the camera.
// Applies `params` to the scene before rendering.
GradRenderResult render_with_grad(SceneDescription& scene, const ParameterSet& params,
                                  const CameraSpec& camera, const RenderSettings& settings,
                                  const LossSpec& loss, const LossTarget& target,
                                  const Extractor* extractor = nullptr);

// d(similarity)/d(latent) of the eps-guarded cosine similarity, target fixed.
std::vector<double> hypersphere_similarity_backward(const LatentVector& z,
                                                    const LatentVector& z_target,
                                                    double eps = 1e-8);

}  // namespace mrd
