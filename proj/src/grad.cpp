#include "mrd/grad.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "mrd/errors.hpp"
#include "path_core.hpp"

namespace mrd {

namespace {

using detail::FactorGrad;

// ---------------------------------------------------------------------------
// Parameter bindings: where derivative mass scatters to

constexpr int kScalarSlots = 5;  // roughness, metallic, spec_trans, eta, anisotropy

int scalar_slot(const std::string& field) {
    if (field == "roughness") return 0;
    if (field == "metallic") return 1;
    if (field == "spec_trans") return 2;
    if (field == "eta") return 3;
    if (field == "anisotropy") return 4;
    return -1;
}

int base_channel(const std::string& field) {
    if (field == "albedo.r" || field == "base_color.r") return 0;
    if (field == "albedo.g" || field == "base_color.g") return 1;
    if (field == "albedo.b" || field == "base_color.b") return 2;
    return -1;
}

struct MatBind {
    int base_entry[3] = {-1, -1, -1};
    int scalar_entry[kScalarSlots] = {-1, -1, -1, -1, -1};
    int tex_entry = -1;
    const ImageTex* tex = nullptr;
    bool any = false;
};

struct NormalChain {
    std::vector<std::vector<int>> vfaces;
    std::vector<double> s_len;  // length of the raw area-weighted normal sum
};

struct Bindings {
    std::vector<MatBind> materials;   // indexed by scene material
    std::vector<int> vertex_entry;    // indexed by scene object
    std::vector<NormalChain> chains;  // indexed by scene object
    bool any_material = false;
    bool any_vertex = false;
};

const AlbedoMap* material_albedo_of(const Material& mat) {
    if (const DiffuseMaterial* d = std::get_if<DiffuseMaterial>(&mat.kind)) return &d->albedo;
    return &std::get<PrincipledMaterial>(mat.kind).base_color;
}

Bindings build_bindings(const SceneDescription& scene, const ParameterSet& params) {
    Bindings b;
    b.materials.resize(scene.materials.size());
    b.vertex_entry.assign(scene.objects.size(), -1);
    b.chains.resize(scene.objects.size());
    for (size_t ei = 0; ei < params.entries.size(); ++ei) {
        const ParamEntry& e = params.entries[ei];
        switch (e.kind) {
            case EntryKind::VertexPositions: {
                const int oi = scene.object_index(e.object);
                if (oi < 0) throw ValidationError("parameter '" + e.name + "': unknown object");
                b.vertex_entry[oi] = static_cast<int>(ei);
                b.any_vertex = true;
                const Mesh& mesh = scene.objects[oi].mesh;
                NormalChain nc;
                nc.vfaces = vertex_face_adjacency(mesh);
                std::vector<Vec3> raw(mesh.positions.size(), Vec3(0.0));
                for (const auto& fc : mesh.faces) {
                    const Vec3 n = cross(mesh.positions[fc[1]] - mesh.positions[fc[0]],
                                         mesh.positions[fc[2]] - mesh.positions[fc[0]]);
                    raw[fc[0]] += n;
                    raw[fc[1]] += n;
                    raw[fc[2]] += n;
                }
                nc.s_len.resize(raw.size());
                for (size_t v = 0; v < raw.size(); ++v)
                    nc.s_len[v] = std::max(length(raw[v]), 1e-18);
                b.chains[oi] = std::move(nc);
                break;
            }
            case EntryKind::BsdfScalar: {
                const int mi = scene.material_index(e.material);
                if (mi < 0) throw ValidationError("parameter '" + e.name + "': unknown material");
                MatBind& mb = b.materials[mi];
                const int ch = base_channel(e.field);
                if (ch >= 0) {
                    mb.base_entry[ch] = static_cast<int>(ei);
                } else {
                    const int slot = scalar_slot(e.field);
                    if (slot < 0)
                        throw ValidationError("parameter '" + e.name + "': unknown field");
                    mb.scalar_entry[slot] = static_cast<int>(ei);
                }
                mb.any = true;
                b.any_material = true;
                break;
            }
            case EntryKind::TextureTexels: {
                const int mi = scene.material_index(e.material);
                if (mi < 0) throw ValidationError("parameter '" + e.name + "': unknown material");
                MatBind& mb = b.materials[mi];
                mb.tex_entry = static_cast<int>(ei);
                mb.tex = std::get_if<ImageTex>(material_albedo_of(scene.materials[mi]));
                if (!mb.tex)
                    throw ValidationError("parameter '" + e.name + "': albedo is not a texture");
                mb.any = true;
                b.any_material = true;
                break;
            }
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Replay recorder

struct Pending {
    FactorGrad fg;
    double base[3] = {0, 0, 0};
    double scalar[kScalarSlots] = {0, 0, 0, 0, 0};
    Vec3 n{0, 0, 0};
    bool touched = false;
};

class ReplayRecorder final : public detail::PathRecorder {
public:
    ReplayRecorder(const SceneDescription& scene, const Bindings& bind,
                   const std::vector<double>& adjoint, int width, int spp, GradientSet& out)
        : scene_(scene), bind_(bind), adjoint_(adjoint), width_(width),
          inv_spp_(1.0 / spp), out_(out) {}

    void begin_sample(int px, int py) override {
        const size_t i = 3 * (static_cast<size_t>(py) * width_ + px);
        aw_[0] = adjoint_[i] * inv_spp_;
        aw_[1] = adjoint_[i + 1] * inv_spp_;
        aw_[2] = adjoint_[i + 2] * inv_spp_;
        stack_.clear();
    }

    void push(const FactorGrad& f) override {
        Pending p;
        p.fg = f;
        stack_.push_back(std::move(p));
    }

    void pop() override {
        scatter(stack_.back());
        stack_.pop_back();
    }

    void term(const RGB& tail) override {
        const size_t k = stack_.size();
        if (k == 0) return;
        if (aw_[0] == 0.0 && aw_[1] == 0.0 && aw_[2] == 0.0) return;
        pre_.resize(k + 1);
        suf_.resize(k + 1);
        pre_[0] = RGB(1.0);
        for (size_t i = 0; i < k; ++i) pre_[i + 1] = pre_[i] * stack_[i].fg.value;
        suf_[k] = tail;
        for (size_t i = k; i-- > 0;) suf_[i] = stack_[i].fg.value * suf_[i + 1];
        for (size_t i = 0; i < k; ++i) {
            Pending& p = stack_[i];
            if (!p.fg.has_mat && !p.fg.has_normal) continue;
            double w[3];
            bool nonzero = false;
            for (int c = 0; c < 3; ++c) {
                w[c] = aw_[c] * pre_[i][c] * suf_[i + 1][c];
                nonzero = nonzero || w[c] != 0.0;
            }
            if (!nonzero) continue;
            p.touched = true;
            if (p.fg.has_mat) {
                for (int c = 0; c < 3; ++c) {
                    p.base[c] += w[c] * p.fg.d_base[c];
                    for (int s = 0; s < kScalarSlots; ++s)
                        p.scalar[s] += w[c] * p.fg.d_scalar[s][c];
                }
            }
            if (p.fg.has_normal)
                for (int c = 0; c < 3; ++c) p.n += p.fg.dn[c] * w[c];
        }
    }

    void end_sample() override {
        while (!stack_.empty()) pop();
    }

    // forward pass discarded this sample (non-finite radiance)
    void abandon_sample() { stack_.clear(); }

private:
    void scatter(const Pending& p) {
        if (!p.touched) return;
        if (p.fg.has_mat) {
            const MatBind& mb = bind_.materials[p.fg.mat];
            if (mb.any) {
                for (int c = 0; c < 3; ++c)
                    if (mb.base_entry[c] >= 0) out_.values[mb.base_entry[c]][0] += p.base[c];
                for (int s = 0; s < kScalarSlots; ++s)
                    if (mb.scalar_entry[s] >= 0) out_.values[mb.scalar_entry[s]][0] += p.scalar[s];
                if (mb.tex_entry >= 0 && mb.tex) {
                    const TexelFootprint fp = texel_footprint(*mb.tex, p.fg.uv);
                    for (int t = 0; t < fp.count; ++t)
                        for (int c = 0; c < 3; ++c)
                            out_.values[mb.tex_entry][3 * fp.idx[t] + c] += fp.w[t] * p.base[c];
                }
            }
        }
        if (p.fg.has_normal && length_squared(p.n) > 0.0) scatter_normal(p);
    }

    // Chain d(loss)/d(shading normal) back to one-ring vertex positions via
    // barycentric vertex-normal interpolation and area-weighted face normals.
    void scatter_normal(const Pending& p) {
        const int entry = bind_.vertex_entry[p.fg.object];
        if (entry < 0) return;
        const NormalChain& nc = bind_.chains[p.fg.object];
        const Mesh& mesh = scene_.objects[p.fg.object].mesh;
        const auto& fc = mesh.faces[p.fg.face];
        const double b[3] = {1.0 - p.fg.b1 - p.fg.b2, p.fg.b1, p.fg.b2};
        const Vec3 n_raw = mesh.normals[fc[0]] * b[0] + mesh.normals[fc[1]] * b[1] +
                           mesh.normals[fc[2]] * b[2];
        const double nr_len = length(n_raw);
        if (nr_len < 1e-12) return;
        const Vec3 n_sh = n_raw / nr_len;
        const Vec3 n_geo = cross(mesh.positions[fc[1]] - mesh.positions[fc[0]],
                                 mesh.positions[fc[2]] - mesh.positions[fc[0]]);
        const double orient = dot(n_geo, n_raw) < 0.0 ? -1.0 : 1.0;
        const Vec3 w_sh = p.n * orient;
        const Vec3 w_raw = (w_sh - n_sh * dot(n_sh, w_sh)) / nr_len;
        std::vector<double>& g = out_.values[entry];
        for (int i = 0; i < 3; ++i) {
            const int v = fc[i];
            const Vec3 u = w_raw * b[i];
            const Vec3 nv = mesh.normals[v];
            const Vec3 wv = (u - nv * dot(nv, u)) / nc.s_len[v];
            for (const int fi : nc.vfaces[v]) {
                const auto& ff = mesh.faces[fi];
                const Vec3 e1 = mesh.positions[ff[1]] - mesh.positions[ff[0]];
                const Vec3 e2 = mesh.positions[ff[2]] - mesh.positions[ff[0]];
                const Vec3 gb = cross(e2, wv);
                const Vec3 gc = cross(wv, e1);
                const Vec3 ga = -(gb + gc);
                for (int a = 0; a < 3; ++a) {
                    g[3 * ff[0] + a] += ga[a];
                    g[3 * ff[1] + a] += gb[a];
                    g[3 * ff[2] + a] += gc[a];
                }
            }
        }
    }

    const SceneDescription& scene_;
    const Bindings& bind_;
    const std::vector<double>& adjoint_;
    int width_;
    double inv_spp_;
    GradientSet& out_;
    double aw_[3] = {0, 0, 0};
    std::vector<Pending> stack_;
    std::vector<RGB> pre_, suf_;
};

// ---------------------------------------------------------------------------
// Tiled forward + replay

constexpr int kTile = 16;

void parallel_tiles(int tile_count, const std::function<void(int)>& fn) {
    const int workers = std::min(worker_count(), tile_count);
    if (workers <= 1) {
        for (int t = 0; t < tile_count; ++t) fn(t);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i)
        pool.emplace_back([&]() {
            while (true) {
                const int t = next.fetch_add(1);
                if (t >= tile_count) return;
                fn(t);
            }
        });
    for (auto& th : pool) th.join();
}

HDRImage forward_tiled(const SceneDescription& scene, const SceneBVH& bvh,
                       const RenderSettings& st, const CameraModel& cam, RenderStats* stats) {
    HDRImage img(cam.width, cam.height);
    const int tiles_x = (cam.width + kTile - 1) / kTile;
    const int tiles_y = (cam.height + kTile - 1) / kTile;
    std::atomic<long long> bad{0};
    parallel_tiles(tiles_x * tiles_y, [&](int tile) {
        const int tx = (tile % tiles_x) * kTile;
        const int ty = (tile / tiles_x) * kTile;
        for (int y = ty; y < std::min(ty + kTile, cam.height); ++y)
            for (int x = tx; x < std::min(tx + kTile, cam.width); ++x) {
                RGB acc(0.0);
                for (int s = 0; s < st.spp; ++s) {
                    const RGB L = detail::trace_path(scene, bvh, st, cam, x, y, s, nullptr);
                    if (all_finite(L))
                        acc += L;
                    else
                        ++bad;
                }
                img.set_pixel(x, y, acc / static_cast<double>(st.spp));
            }
    });
    if (stats) stats->nan_samples += bad.load();
    return img;
}

void replay_tiled(const SceneDescription& scene, const SceneBVH& bvh, const RenderSettings& st,
                  const CameraModel& cam, const Bindings& bind,
                  const std::vector<double>& adjoint, const ParameterSet& params,
                  GradientSet& grads) {
    const int tiles_x = (cam.width + kTile - 1) / kTile;
    const int tiles_y = (cam.height + kTile - 1) / kTile;
    const int tile_count = tiles_x * tiles_y;
    std::vector<GradientSet> partials(tile_count);
    parallel_tiles(tile_count, [&](int tile) {
        partials[tile] = GradientSet::zeros_like(params);
        ReplayRecorder rec(scene, bind, adjoint, cam.width, st.spp, partials[tile]);
        const int tx = (tile % tiles_x) * kTile;
        const int ty = (tile / tiles_x) * kTile;
        for (int y = ty; y < std::min(ty + kTile, cam.height); ++y)
            for (int x = tx; x < std::min(tx + kTile, cam.width); ++x)
                for (int s = 0; s < st.spp; ++s) {
                    rec.begin_sample(x, y);
                    const RGB L = detail::trace_path(scene, bvh, st, cam, x, y, s, &rec);
                    if (all_finite(L))
                        rec.end_sample();
                    else
                        rec.abandon_sample();
                }
    });
    // fixed reduction order: results are independent of worker count
    for (int t = 0; t < tile_count; ++t) grads.add(partials[t]);
}

// ---------------------------------------------------------------------------
// Loss adjoints (d loss / d HDR pixel values)

struct LossEval {
    double loss = 0.0;
    std::vector<double> adj_a;
    std::vector<double> adj_b;  // dual-buffer second render
};

LossEval eval_loss(const LossSpec& spec, const HDRImage& a, const HDRImage* b,
                   const LossTarget& target, const Extractor* ex) {
    LossEval out;
    const size_t n = a.data.size();
    out.adj_a.assign(n, 0.0);
    switch (spec.kind) {
        case LossKind::MAE: {
            if (spec.display_space) {
                const DisplayImage d = tonemap(a);
                if (d.data.size() != target.display.data.size())
                    throw InvalidArgument("loss: image dimensions differ");
                out.loss = loss_mae(d, target.display);
                const double inv = 1.0 / static_cast<double>(n);
                for (size_t i = 0; i < n; ++i) {
                    const double r = d.data[i] - target.display.data[i];
                    const double sgn = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
                    out.adj_a[i] = sgn * inv * tonemap_derivative(a.data[i]);
                }
            } else {
                if (a.data.size() != target.hdr.data.size())
                    throw InvalidArgument("loss: image dimensions differ");
                out.loss = loss_mae(a, target.hdr);
                const double inv = 1.0 / static_cast<double>(n);
                for (size_t i = 0; i < n; ++i) {
                    const double r = a.data[i] - target.hdr.data[i];
                    out.adj_a[i] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * inv;
                }
            }
            break;
        }
        case LossKind::DualBuffer: {
            if (!b) throw InvalidArgument("dual-buffer loss requires two renders");
            out.adj_b.assign(n, 0.0);
            const double inv = 1.0 / static_cast<double>(n);
            if (spec.display_space) {
                const DisplayImage da = tonemap(a), db = tonemap(*b);
                out.loss = loss_dual_buffer(da, db, target.display, spec.dual_unsquared);
                for (size_t i = 0; i < n; ++i) {
                    const double ra = da.data[i] - target.display.data[i];
                    const double rb = db.data[i] - target.display.data[i];
                    double ga, gb;
                    if (spec.dual_unsquared) {
                        ga = rb * inv;
                        gb = ra * inv;
                    } else {
                        ga = 2.0 * ra * rb * rb * inv;
                        gb = 2.0 * ra * ra * rb * inv;
                    }
                    out.adj_a[i] = ga * tonemap_derivative(a.data[i]);
                    out.adj_b[i] = gb * tonemap_derivative(b->data[i]);
                }
            } else {
                out.loss = loss_dual_buffer(a, *b, target.hdr, spec.dual_unsquared);
                for (size_t i = 0; i < n; ++i) {
                    const double ra = a.data[i] - target.hdr.data[i];
                    const double rb = b->data[i] - target.hdr.data[i];
                    if (spec.dual_unsquared) {
                        out.adj_a[i] = rb * inv;
                        out.adj_b[i] = ra * inv;
                    } else {
                        out.adj_a[i] = 2.0 * ra * rb * rb * inv;
                        out.adj_b[i] = 2.0 * ra * ra * rb * inv;
                    }
                }
            }
            break;
        }
        case LossKind::FeatureDistance: {
            if (!ex) throw InvalidArgument("feature loss requires an extractor");
            const DisplayImage d = tonemap(a);
            std::vector<double> dpix;
            if (ex->produces_latent()) {
                const LatentVector z = extract(*ex, d);
                if (z.dim() != target.latent.dim())
                    throw InvalidArgument("feature loss: latent dimensions differ");
                double sim = 0.0;
                const LatentVector zn = normalize_to_sphere(z);
                const LatentVector tn = normalize_to_sphere(target.latent);
                for (int i = 0; i < z.dim(); ++i) sim += zn.v[i] * tn.v[i];
                out.loss = 1.0 - sim;
                std::vector<double> dz = hypersphere_similarity_backward(z, target.latent);
                for (double& v : dz) v = -v;
                dpix = extract_backward(*ex, d, dz);
            } else {
                out.loss = perceptual_distance(*ex, d, target.display);
                dpix = perceptual_distance_backward(*ex, d, target.display);
            }
            for (size_t i = 0; i < n; ++i)
                out.adj_a[i] = dpix[i] * tonemap_derivative(a.data[i]);
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Boundary term: silhouette-edge sampling for vertex gradients

constexpr double kEdgeSamplesPerPixel = 1.0;
constexpr double kEdgeOffsetPx = 0.35;
constexpr int kEdgeSideSamples = 2;

void boundary_pass(const SceneDescription& scene, const SceneBVH& bvh,
                   const RenderSettings& st, const CameraModel& cam, const Bindings& bind,
                   const std::vector<double>& adjoint, GradientSet& grads) {
    for (size_t oi = 0; oi < scene.objects.size(); ++oi) {
        const int entry = bind.vertex_entry[oi];
        if (entry < 0) continue;
        const Mesh& mesh = scene.objects[oi].mesh;
        const std::vector<MeshEdge> edges = build_edges(mesh);
        std::vector<double>& g = grads.values[entry];

        for (size_t ei = 0; ei < edges.size(); ++ei) {
            const MeshEdge& e = edges[ei];
            if (e.f0 < 0 || e.f1 < 0) continue;
            const auto face_side = [&](int fi) {
                const auto& fc = mesh.faces[fi];
                const Vec3 n = cross(mesh.positions[fc[1]] - mesh.positions[fc[0]],
                                     mesh.positions[fc[2]] - mesh.positions[fc[0]]);
                const Vec3 centroid =
                    (mesh.positions[fc[0]] + mesh.positions[fc[1]] + mesh.positions[fc[2]]) / 3.0;
                return dot(n, centroid - cam.origin);
            };
            const double d0 = face_side(e.f0), d1 = face_side(e.f1);
            if (d0 * d1 >= 0.0) continue;  // not a silhouette edge

            const Vec3 pa = mesh.positions[e.v0], pb = mesh.positions[e.v1];
            double ax, ay, bx, by;
            if (!cam.project(pa, ax, ay) || !cam.project(pb, bx, by)) continue;
            const double len_px = std::hypot(bx - ax, by - ay);
            if (len_px < 1e-9) continue;
            const int samples =
                std::min(24, 1 + static_cast<int>(len_px * kEdgeSamplesPerPixel));
            double ex_ = (bx - ax) / len_px, ey_ = (by - ay) / len_px;
            const double nx = -ey_, ny = ex_;
            const double w_len = len_px / samples;

            Pcg32 rng = make_stream(st.seed ^ 0xb07dull, oi, ei);
            for (int k = 0; k < samples; ++k) {
                const double t = (k + rng.next_double()) / samples;
                const Vec3 X = lerp(pa, pb, t);
                double sx, sy, jac[6];
                if (!cam.project(X, sx, sy, jac)) continue;
                const int ix = static_cast<int>(std::floor(sx + 0.5));
                const int iy = static_cast<int>(std::floor(sy + 0.5));
                if (ix < 0 || ix >= cam.width || iy < 0 || iy >= cam.height) continue;
                const size_t pi = 3 * (static_cast<size_t>(iy) * cam.width + ix);
                const double aw[3] = {adjoint[pi], adjoint[pi + 1], adjoint[pi + 2]};
                if (aw[0] == 0.0 && aw[1] == 0.0 && aw[2] == 0.0) continue;

                // the edge point must be directly visible
                const Vec3 to_x = X - cam.origin;
                const double dist = length(to_x);
                Ray vis;
                vis.o = cam.origin;
                vis.d = to_x / dist;
                vis.t_min = 1e-5;
                vis.t_max = dist * (1.0 - 1e-4);
                if (bvh.occluded(vis)) continue;

                // radiance just on each side of the projected edge
                RGB side_l[2];
                for (int side = 0; side < 2; ++side) {
                    const double sgn = side == 0 ? -1.0 : 1.0;  // 0: minus side
                    RGB acc(0.0);
                    for (int s = 0; s < kEdgeSideSamples; ++s) {
                        const Ray ray = cam.primary_ray(sx + sgn * nx * kEdgeOffsetPx,
                                                        sy + sgn * ny * kEdgeOffsetPx);
                        const RGB L = detail::trace_ray(scene, bvh, st, ray, rng, nullptr);
                        if (all_finite(L)) acc += L;
                    }
                    side_l[side] = acc / static_cast<double>(kEdgeSideSamples);
                }
                const RGB delta = side_l[0] - side_l[1];  // L_minus - L_plus
                const double scale =
                    (aw[0] * delta.x + aw[1] * delta.y + aw[2] * delta.z) * w_len;
                if (scale == 0.0) continue;
                const Vec3 jn{nx * jac[0] + ny * jac[3], nx * jac[1] + ny * jac[4],
                              nx * jac[2] + ny * jac[5]};
                for (int a = 0; a < 3; ++a) {
                    g[3 * e.v0 + a] += scale * (1.0 - t) * jn[a];
                    g[3 * e.v1 + a] += scale * t * jn[a];
                }
            }
        }
    }
}

}  // namespace

std::vector<double> hypersphere_similarity_backward(const LatentVector& z,
                                                    const LatentVector& z_target, double eps) {
    const int d = z.dim();
    double n2 = 0.0;
    for (double v : z.v) n2 += v * v;
    const double n = std::sqrt(n2);
    const double s = n + eps;
    const LatentVector tn = normalize_to_sphere(z_target, eps);
    double z_dot_tn = 0.0;
    for (int i = 0; i < d; ++i) z_dot_tn += z.v[i] * tn.v[i];
    std::vector<double> g(d, 0.0);
    for (int i = 0; i < d; ++i) {
        g[i] = tn.v[i] / s;
        if (n > 1e-12) g[i] -= z_dot_tn * z.v[i] / (n * s * s);
    }
    return g;
}

GradRenderResult render_with_grad(SceneDescription& scene, const ParameterSet& params,
                                  const CameraSpec& camera, const RenderSettings& settings,
                                  const LossSpec& loss, const LossTarget& target,
                                  const Extractor* extractor) {
    params.validate();
    params.apply(scene);
    settings.validate();
    const CameraModel cam = CameraModel::make(camera);
    SceneBVH bvh;
    bvh.build(scene);

    GradRenderResult out;
    RenderSettings st_a = settings;
    out.image = forward_tiled(scene, bvh, st_a, cam, &out.stats);

    HDRImage image_b;
    const bool dual = loss.kind == LossKind::DualBuffer;
    RenderSettings st_b = settings;
    if (dual) {
        st_b.seed = hash_combine(settings.seed, 0x64756232ull);
        image_b = forward_tiled(scene, bvh, st_b, cam, &out.stats);
    }

    const LossEval le = eval_loss(loss, out.image, dual ? &image_b : nullptr, target, extractor);
    out.loss = le.loss;

    const Bindings bind = build_bindings(scene, params);
    out.grads = GradientSet::zeros_like(params);
    if (bind.any_material || bind.any_vertex) {
        replay_tiled(scene, bvh, st_a, cam, bind, le.adj_a, params, out.grads);
        if (dual) replay_tiled(scene, bvh, st_b, cam, bind, le.adj_b, params, out.grads);
    }
    if (bind.any_vertex) {
        std::vector<double> adj = le.adj_a;
        if (dual)
            for (size_t i = 0; i < adj.size(); ++i) adj[i] += le.adj_b[i];
        boundary_pass(scene, bvh, st_a, cam, bind, adj, out.grads);
    }

    if (!out.grads.all_finite()) {
        for (size_t i = 0; i < out.grads.values.size(); ++i)
            for (double v : out.grads.values[i])
                if (!std::isfinite(v))
                    throw ValidationError("non-finite gradient for parameter '" +
                                          params.entries[i].name + "' (seed " +
                                          std::to_string(settings.seed) + ")");
    }
    return out;
}

}  // namespace mrd
