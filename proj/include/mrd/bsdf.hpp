#pragma once

#include <optional>

#include "mrd/rng.hpp"
#include "mrd/scene.hpp"
#include "mrd/vec3.hpp"

namespace mrd {

// Material state at a shading point. Directions are expressed in a local
// frame whose +Z is the shading normal and whose hemisphere contains wo;
// `entering` preserves which geometric side the ray arrived from.
struct LocalBsdf {
    RGB base{0.5, 0.5, 0.5};
    double roughness = 0.5;
    double metallic = 0.0;
    double spec_trans = 0.0;
    double eta = 1.5;
    double anisotropy = 0.0;
    bool principled = false;
    bool entering = true;
};

LocalBsdf local_bsdf(const Material& mat, const Vec2& uv, bool entering);

struct BsdfSample {
    Vec3 wi;          // local frame
    double pdf = 0.0; // solid-angle density of the full mixture
    RGB f;            // BSDF value (without the cosine factor)
    bool transmitted = false;
};

RGB bsdf_eval(const LocalBsdf& m, const Vec3& wo, const Vec3& wi);
double bsdf_pdf(const LocalBsdf& m, const Vec3& wo, const Vec3& wi);
std::optional<BsdfSample> bsdf_sample(const LocalBsdf& m, const Vec3& wo, Pcg32& rng);

// Partial derivatives of the BSDF value with respect to the local material
// parameters, per channel. Scalar slots: roughness, metallic, spec_trans,
// eta, anisotropy.
struct BsdfGrad {
    RGB f;
    RGB f_diffuse;        // diffuse-lobe component of f (drives normal chains)
    double d_base[3];     // d f_c / d base_c
    double d_scalar[5][3];
};

BsdfGrad bsdf_eval_grad(const LocalBsdf& m, const Vec3& wo, const Vec3& wi);

}  // namespace mrd
