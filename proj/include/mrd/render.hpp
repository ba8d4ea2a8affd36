#pragma once

#include <cstdint>
#include <vector>

#include "mrd/bvh.hpp"
#include "mrd/image.hpp"
#include "mrd/scene.hpp"

namespace mrd {

struct RenderSettings {
    int spp = 32;
    int max_depth = 8;
    int rr_start = 5;        // first bounce eligible for Russian roulette
    uint64_t seed = 0;

    void validate() const;
};

struct RenderStats {
    long long nan_samples = 0;  // discarded non-finite radiance samples
};

// Pinhole camera with a precomputed basis. Pixel coordinates are continuous,
// (0, 0) at the top-left pixel center.
struct CameraModel {
    Vec3 origin, fwd, right, up;
    double tan_half = 1.0, aspect = 1.0;
    int width = 0, height = 0;

    static CameraModel make(const CameraSpec& spec);
    Ray primary_ray(double px, double py) const;
    // Projects a world point; returns false behind the camera. `jac` (2x3,
    // row-major) receives d(px,py)/d(world) when non-null.
    bool project(const Vec3& p, double& px, double& py, double* jac = nullptr) const;
};

// Unbiased path-traced estimate of per-pixel radiance. Deterministic for a
// fixed seed and independent of worker count.
HDRImage render(const SceneDescription& scene, const CameraSpec& camera,
                const RenderSettings& settings, RenderStats* stats = nullptr);

// Per-pixel mask of pixels fully covered by geometry (center + corner probes).
std::vector<uint8_t> primary_coverage_mask(const SceneDescription& scene,
                                           const CameraSpec& camera);

int worker_count();

}  // namespace mrd
