#include "mrd/bvh.hpp"

#include <algorithm>
#include <cmath>

namespace mrd {

namespace {

constexpr int kLeafSize = 4;
constexpr int kBins = 16;

inline bool ray_box(const Ray& ray, const Vec3& inv_d, const Vec3& bmin, const Vec3& bmax,
                    double t_max) {
    double t0 = ray.t_min, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        double near = (bmin[a] - ray.o[a]) * inv_d[a];
        double far = (bmax[a] - ray.o[a]) * inv_d[a];
        if (near > far) std::swap(near, far);
        t0 = near > t0 ? near : t0;
        t1 = far < t1 ? far : t1;
        if (t0 > t1) return false;
    }
    return true;
}

inline double half_area(const Vec3& bmin, const Vec3& bmax) {
    const Vec3 d = vmax(bmax - bmin, Vec3(0.0));
    return d.x * d.y + d.y * d.z + d.z * d.x;
}

}  // namespace

void SceneBVH::build(const SceneDescription& scene) {
    tris_.clear();
    nodes_.clear();
    order_.clear();
    for (size_t oi = 0; oi < scene.objects.size(); ++oi) {
        const Mesh& mesh = scene.objects[oi].mesh;
        for (size_t fi = 0; fi < mesh.faces.size(); ++fi) {
            const auto& f = mesh.faces[fi];
            Tri t;
            t.p0 = mesh.positions[f[0]];
            t.e1 = mesh.positions[f[1]] - t.p0;
            t.e2 = mesh.positions[f[2]] - t.p0;
            t.object = static_cast<int>(oi);
            t.face = static_cast<int>(fi);
            tris_.push_back(t);
        }
    }
    if (tris_.empty()) return;

    const int n = static_cast<int>(tris_.size());
    std::vector<Vec3> centroids(n), mins(n), maxs(n);
    for (int i = 0; i < n; ++i) {
        const Tri& t = tris_[i];
        const Vec3 p1 = t.p0 + t.e1, p2 = t.p0 + t.e2;
        mins[i] = vmin(t.p0, vmin(p1, p2));
        maxs[i] = vmax(t.p0, vmax(p1, p2));
        centroids[i] = (mins[i] + maxs[i]) * 0.5;
    }
    order_.resize(n);
    for (int i = 0; i < n; ++i) order_[i] = i;
    nodes_.reserve(2 * n);
    build_node(order_, 0, n, centroids, mins, maxs);
}

int SceneBVH::build_node(std::vector<int>& order, int begin, int end,
                         const std::vector<Vec3>& centroids, const std::vector<Vec3>& mins,
                         const std::vector<Vec3>& maxs) {
    const int node_idx = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Vec3 bmin(1e30), bmax(-1e30), cmin(1e30), cmax(-1e30);
    for (int i = begin; i < end; ++i) {
        bmin = vmin(bmin, mins[order[i]]);
        bmax = vmax(bmax, maxs[order[i]]);
        cmin = vmin(cmin, centroids[order[i]]);
        cmax = vmax(cmax, centroids[order[i]]);
    }
    nodes_[node_idx].bmin = bmin;
    nodes_[node_idx].bmax = bmax;

    const int count = end - begin;
    const Vec3 cext = cmax - cmin;
    const int axis = cext.x > cext.y ? (cext.x > cext.z ? 0 : 2) : (cext.y > cext.z ? 1 : 2);
    if (count <= kLeafSize || cext[axis] <= 1e-12) {
        nodes_[node_idx].left = begin;
        nodes_[node_idx].count = count;
        return node_idx;
    }

    // binned SAH split
    struct Bin {
        Vec3 bmin{1e30, 1e30, 1e30}, bmax{-1e30, -1e30, -1e30};
        int count = 0;
    };
    Bin bins[kBins];
    const double scale = kBins / cext[axis];
    auto bin_of = [&](int tri) {
        return std::min(kBins - 1,
                        static_cast<int>((centroids[tri][axis] - cmin[axis]) * scale));
    };
    for (int i = begin; i < end; ++i) {
        Bin& b = bins[bin_of(order[i])];
        b.bmin = vmin(b.bmin, mins[order[i]]);
        b.bmax = vmax(b.bmax, maxs[order[i]]);
        ++b.count;
    }
    double best_cost = 1e300;
    int best_split = -1;
    for (int split = 1; split < kBins; ++split) {
        Vec3 lmin(1e30), lmax(-1e30), rmin(1e30), rmax(-1e30);
        int lcount = 0, rcount = 0;
        for (int b = 0; b < split; ++b)
            if (bins[b].count) {
                lmin = vmin(lmin, bins[b].bmin);
                lmax = vmax(lmax, bins[b].bmax);
                lcount += bins[b].count;
            }
        for (int b = split; b < kBins; ++b)
            if (bins[b].count) {
                rmin = vmin(rmin, bins[b].bmin);
                rmax = vmax(rmax, bins[b].bmax);
                rcount += bins[b].count;
            }
        if (lcount == 0 || rcount == 0) continue;
        const double cost = lcount * half_area(lmin, lmax) + rcount * half_area(rmin, rmax);
        if (cost < best_cost) {
            best_cost = cost;
            best_split = split;
        }
    }
    int mid;
    if (best_split < 0) {
        mid = (begin + end) / 2;
        std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                         [&](int a, int b) { return centroids[a][axis] < centroids[b][axis]; });
    } else {
        auto it = std::partition(order.begin() + begin, order.begin() + end,
                                 [&](int tri) { return bin_of(tri) < best_split; });
        mid = static_cast<int>(it - order.begin());
        if (mid == begin || mid == end) mid = (begin + end) / 2;
    }
    const int left = build_node(order, begin, mid, centroids, mins, maxs);
    const int right = build_node(order, mid, end, centroids, mins, maxs);
    nodes_[node_idx].left = left;
    nodes_[node_idx].right = right;
    nodes_[node_idx].count = 0;
    return node_idx;
}

std::optional<Hit> SceneBVH::intersect(const Ray& ray) const {
    if (tris_.empty()) return std::nullopt;
    const Vec3 inv_d{1.0 / ray.d.x, 1.0 / ray.d.y, 1.0 / ray.d.z};
    Hit best;
    double t_best = ray.t_max;
    bool found = false;
    int stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        if (!ray_box(ray, inv_d, node.bmin, node.bmax, t_best)) continue;
        if (node.count > 0) {
            for (int i = node.left; i < node.left + node.count; ++i) {
                const Tri& tri = tris_[order_[i]];
                // Moeller-Trumbore
                const Vec3 pvec = cross(ray.d, tri.e2);
                const double det = dot(tri.e1, pvec);
                if (std::abs(det) < 1e-14) continue;
                const double inv_det = 1.0 / det;
                const Vec3 tvec = ray.o - tri.p0;
                const double b1 = dot(tvec, pvec) * inv_det;
                if (b1 < 0.0 || b1 > 1.0) continue;
                const Vec3 qvec = cross(tvec, tri.e1);
                const double b2 = dot(ray.d, qvec) * inv_det;
                if (b2 < 0.0 || b1 + b2 > 1.0) continue;
                const double t = dot(tri.e2, qvec) * inv_det;
                if (t > ray.t_min && t < t_best) {
                    t_best = t;
                    best = {t, tri.object, tri.face, b1, b2};
                    found = true;
                }
            }
        } else {
            stack[sp++] = node.right;
            stack[sp++] = node.left;
        }
    }
    return found ? std::optional<Hit>(best) : std::nullopt;
}

bool SceneBVH::occluded(const Ray& ray) const {
    if (tris_.empty()) return false;
    const Vec3 inv_d{1.0 / ray.d.x, 1.0 / ray.d.y, 1.0 / ray.d.z};
    int stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        if (!ray_box(ray, inv_d, node.bmin, node.bmax, ray.t_max)) continue;
        if (node.count > 0) {
            for (int i = node.left; i < node.left + node.count; ++i) {
                const Tri& tri = tris_[order_[i]];
                const Vec3 pvec = cross(ray.d, tri.e2);
                const double det = dot(tri.e1, pvec);
                if (std::abs(det) < 1e-14) continue;
                const double inv_det = 1.0 / det;
                const Vec3 tvec = ray.o - tri.p0;
                const double b1 = dot(tvec, pvec) * inv_det;
                if (b1 < 0.0 || b1 > 1.0) continue;
                const Vec3 qvec = cross(tvec, tri.e1);
                const double b2 = dot(ray.d, qvec) * inv_det;
                if (b2 < 0.0 || b1 + b2 > 1.0) continue;
                const double t = dot(tri.e2, qvec) * inv_det;
                if (t > ray.t_min && t < ray.t_max) return true;
            }
        } else {
            stack[sp++] = node.right;
            stack[sp++] = node.left;
        }
    }
    return false;
}

}  // namespace mrd
