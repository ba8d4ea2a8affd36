#pragma once

// Shared path-tracing core. The forward render and the gradient replay walk
// identical sample streams; a recorder (null for plain rendering) observes
// the multiplicative factor stack and emitted radiance terms of every path.

#include <cmath>
#include <optional>

#include "mrd/bsdf.hpp"
#include "mrd/bvh.hpp"
#include "mrd/render.hpp"
#include "mrd/rng.hpp"
#include "mrd/scene.hpp"

namespace mrd::detail {

// One multiplicative RGB factor of a path term, with the sparse derivative
// payload needed by the replay pass. Sampling densities and MIS weights are
// treated as detached constants.
struct FactorGrad {
    RGB value{1.0, 1.0, 1.0};

    // material derivative block
    bool has_mat = false;
    int mat = -1;  // scene material index
    Vec2 uv{0.0, 0.0};
    double d_base[3] = {0, 0, 0};      // d value_c / d base_c
    double d_scalar[5][3] = {};        // roughness, metallic, spec_trans, eta, anisotropy

    // shading-normal derivative block (cosine-factor chain)
    bool has_normal = false;
    int object = -1, face = -1;
    double b1 = 0.0, b2 = 0.0;
    Vec3 dn[3];  // d value_c / d n_shading (world)
};

class PathRecorder {
public:
    virtual ~PathRecorder() = default;
    virtual void begin_sample(int px, int py) = 0;
    virtual void push(const FactorGrad& f) = 0;
    virtual void pop() = 0;
    // Emit a radiance term: (product of pushed factors) * tail.
    virtual void term(const RGB& tail) = 0;
    virtual void end_sample() = 0;
};

inline FactorGrad material_factor(const BsdfGrad& bg, double cosw, double scale_nocos,
                                  const Vec3& wi_world, double trans_sign, double flip,
                                  int mat_idx, const Vec2& uv, int object, int face, double b1,
                                  double b2) {
    FactorGrad fg;
    const double scale = cosw * scale_nocos;
    fg.value = bg.f * scale;
    fg.has_mat = true;
    fg.mat = mat_idx;
    fg.uv = uv;
    for (int c = 0; c < 3; ++c) {
        fg.d_base[c] = bg.d_base[c] * scale;
        for (int s = 0; s < 5; ++s) fg.d_scalar[s][c] = bg.d_scalar[s][c] * scale;
    }
    fg.has_normal = true;
    fg.object = object;
    fg.face = face;
    fg.b1 = b1;
    fg.b2 = b2;
    // d(f*cos)/dn: the cosine chain, exact for every lobe; the frame rotation
    // of specular lobes is omitted (diffuse f is frame-constant).
    const double s_n = scale_nocos * trans_sign * flip;
    for (int c = 0; c < 3; ++c) fg.dn[c] = wi_world * (bg.f[c] * s_n);
    return fg;
}

// Transport along a given ray; `rng` continues the caller's stream.
inline RGB trace_ray(const SceneDescription& scene, const SceneBVH& bvh,
                     const RenderSettings& st, Ray ray, Pcg32& rng, PathRecorder* rec) {
    RGB L(0.0), beta(1.0);
    double prev_pdf = 0.0;
    Vec3 prev_n{0, 1, 0};
    int depth = 0;
    while (true) {
        const auto hit = bvh.intersect(ray);
        if (!hit) {
            const RGB le = env_eval(scene.environment, ray.d);
            double w = 1.0;
            if (depth > 0) {
                const double pdf_e = env_pdf(scene.environment, prev_n, ray.d);
                if (prev_pdf + pdf_e > 0.0) w = prev_pdf / (prev_pdf + pdf_e);
            }
            L += beta * le * w;
            if (rec) rec->term(le * w);
            break;
        }

        const SceneObject& obj = scene.objects[hit->object];
        const Mesh& mesh = obj.mesh;
        const auto& fc = mesh.faces[hit->face];
        const double b1 = hit->b1, b2 = hit->b2, b0 = 1.0 - b1 - b2;
        const Vec3 p = ray.o + ray.d * hit->t;
        Vec3 n_geo = cross(mesh.positions[fc[1]] - mesh.positions[fc[0]],
                           mesh.positions[fc[2]] - mesh.positions[fc[0]]);
        const double n_geo_len = length(n_geo);
        if (n_geo_len < 1e-18) break;
        n_geo = n_geo / n_geo_len;
        Vec3 n_sh = normalize(mesh.normals[fc[0]] * b0 + mesh.normals[fc[1]] * b1 +
                              mesh.normals[fc[2]] * b2);
        if (dot(n_geo, n_sh) < 0.0) n_sh = -n_sh;
        Vec2 uv{0.0, 0.0};
        if (mesh.has_uvs()) {
            uv.x = mesh.uvs[fc[0]].x * b0 + mesh.uvs[fc[1]].x * b1 + mesh.uvs[fc[2]].x * b2;
            uv.y = mesh.uvs[fc[0]].y * b0 + mesh.uvs[fc[1]].y * b1 + mesh.uvs[fc[2]].y * b2;
        }

        const Vec3 wo_world = -ray.d;
        const bool front = dot(n_geo, wo_world) > 0.0;
        double flip = 1.0;
        Vec3 n_frame = n_sh;
        if (dot(n_sh, wo_world) < 0.0) {
            n_frame = -n_sh;
            flip = -1.0;
        }
        const Frame frame = Frame::from_normal(n_frame);
        const Vec3 wo = frame.to_local(wo_world);
        if (wo.z <= 1e-9) break;

        const int mat_idx = scene.material_index(obj.material);
        const LocalBsdf lb = local_bsdf(scene.materials[mat_idx], uv, front);
        const double eps = 1e-6 * (1.0 + length(p));

        // next-event estimation toward the environment
        {
            const EnvSample es = env_sample(scene.environment, n_frame, rng);
            if (es.pdf > 1e-12 && max_component(es.radiance) > 0.0) {
                const Vec3 wl = frame.to_local(es.dir);
                if (std::abs(wl.z) > 1e-9) {
                    const RGB f = bsdf_eval(lb, wo, wl);
                    if (max_component(f) > 0.0) {
                        Ray shadow;
                        shadow.o = p + n_geo * (dot(es.dir, n_geo) > 0.0 ? eps : -eps);
                        shadow.d = es.dir;
                        shadow.t_min = 0.0;
                        if (!bvh.occluded(shadow)) {
                            const double pdf_b = bsdf_pdf(lb, wo, wl);
                            const double w = es.pdf / (es.pdf + pdf_b);
                            const double cosw = std::abs(wl.z);
                            const double scale_nocos = w / es.pdf;
                            L += beta * f * (cosw * scale_nocos) * es.radiance;
                            if (rec) {
                                const BsdfGrad bg = bsdf_eval_grad(lb, wo, wl);
                                rec->push(material_factor(bg, cosw, scale_nocos, es.dir,
                                                          wl.z > 0.0 ? 1.0 : -1.0, flip, mat_idx,
                                                          uv, hit->object, hit->face, b1, b2));
                                rec->term(es.radiance);
                                rec->pop();
                            }
                        }
                    }
                }
            }
        }

        if (depth + 1 >= st.max_depth) break;
        const auto bs = bsdf_sample(lb, wo, rng);
        if (!bs) break;
        const double cosw = std::abs(bs->wi.z);
        if (cosw < 1e-9 || bs->pdf < 1e-12) break;
        const RGB fac = bs->f * (cosw / bs->pdf);
        if (!(max_component(fac) > 0.0)) break;
        beta *= fac;
        const Vec3 wi_world = frame.to_world(bs->wi);
        if (rec) {
            const BsdfGrad bg = bsdf_eval_grad(lb, wo, bs->wi);
            rec->push(material_factor(bg, cosw, 1.0 / bs->pdf, wi_world,
                                      bs->wi.z > 0.0 ? 1.0 : -1.0, flip, mat_idx, uv,
                                      hit->object, hit->face, b1, b2));
        }
        ray.o = p + n_geo * (dot(wi_world, n_geo) > 0.0 ? eps : -eps);
        ray.d = wi_world;
        ray.t_min = 0.0;
        ray.t_max = 1e30;
        prev_pdf = bs->pdf;
        prev_n = n_frame;
        ++depth;

        if (depth >= st.rr_start) {
            const double q = std::clamp(max_component(beta), 0.05, 1.0);
            if (rng.next_double() >= q) break;
            beta /= q;
            if (rec) {
                FactorGrad fg;
                fg.value = RGB(1.0 / q);
                rec->push(fg);
            }
        }
    }
    return L;
}

inline RGB trace_path(const SceneDescription& scene, const SceneBVH& bvh,
                      const RenderSettings& st, const CameraModel& cam, int px, int py,
                      int sample_idx, PathRecorder* rec) {
    Pcg32 rng = make_stream(st.seed, static_cast<uint64_t>(py) * cam.width + px,
                            static_cast<uint64_t>(sample_idx));
    const double jx = rng.next_double(), jy = rng.next_double();
    const Ray ray = cam.primary_ray(px + jx - 0.5, py + jy - 0.5);
    return trace_ray(scene, bvh, st, ray, rng, rec);
}

}  // namespace mrd::detail
