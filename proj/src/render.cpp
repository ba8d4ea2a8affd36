#include "mrd/render.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

#include "mrd/errors.hpp"
#include "path_core.hpp"

namespace mrd {

void RenderSettings::validate() const {
    if (spp < 1) throw InvalidArgument("RenderSettings: spp must be >= 1");
    if (max_depth < 1) throw InvalidArgument("RenderSettings: max_depth must be >= 1");
}

CameraModel CameraModel::make(const CameraSpec& spec) {
    CameraModel cam;
    cam.origin = spec.origin;
    cam.fwd = normalize(spec.look_at - spec.origin);
    const Vec3 r = cross(cam.fwd, normalize(spec.up));
    if (length(r) < 1e-9)
        throw ValidationError("camera: up vector parallel to view direction");
    cam.right = normalize(r);
    cam.up = cross(cam.right, cam.fwd);
    cam.tan_half = std::tan(spec.fov_deg * kPi / 360.0);
    cam.aspect = static_cast<double>(spec.width) / spec.height;
    cam.width = spec.width;
    cam.height = spec.height;
    return cam;
}

Ray CameraModel::primary_ray(double px, double py) const {
    const double sx = (2.0 * (px + 0.5) / width - 1.0) * tan_half * aspect;
    const double sy = (1.0 - 2.0 * (py + 0.5) / height) * tan_half;
    Ray ray;
    ray.o = origin;
    ray.d = normalize(fwd + right * sx + up * sy);
    ray.t_min = 0.0;
    return ray;
}

bool CameraModel::project(const Vec3& p, double& px, double& py, double* jac) const {
    const Vec3 v = p - origin;
    const double z = dot(v, fwd);
    if (z <= 1e-9) return false;
    const double sx = dot(v, right) / z;
    const double sy = dot(v, up) / z;
    px = (sx / (tan_half * aspect) + 1.0) * width / 2.0 - 0.5;
    py = (1.0 - sy / tan_half) * height / 2.0 - 0.5;
    if (jac) {
        const double kx = width / (2.0 * tan_half * aspect);
        const double ky = height / (2.0 * tan_half);
        const Vec3 gx = (right - fwd * sx) * (kx / z);
        const Vec3 gy = (up - fwd * sy) * (-ky / z);
        jac[0] = gx.x;
        jac[1] = gx.y;
        jac[2] = gx.z;
        jac[3] = gy.x;
        jac[4] = gy.y;
        jac[5] = gy.z;
    }
    return true;
}

int worker_count() {
    if (const char* env = std::getenv("MRD_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace {

// Runs fn(tile_index) over tiles with a worker pool; results must not depend
// on scheduling (per-pixel sample streams guarantee that).
void parallel_tiles(int tile_count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || tile_count <= 1) {
        for (int t = 0; t < tile_count; ++t) fn(t);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int n = std::min(workers, tile_count);
    pool.reserve(n);
    for (int i = 0; i < n; ++i) {
        pool.emplace_back([&]() {
            while (true) {
                const int t = next.fetch_add(1);
                if (t >= tile_count) return;
                fn(t);
            }
        });
    }
    for (auto& th : pool) th.join();
}

constexpr int kTile = 16;

}  // namespace

HDRImage render(const SceneDescription& scene, const CameraSpec& camera,
                const RenderSettings& settings, RenderStats* stats) {
    settings.validate();
    const CameraModel cam = CameraModel::make(camera);
    SceneBVH bvh;
    bvh.build(scene);

    HDRImage img(cam.width, cam.height);
    const int tiles_x = (cam.width + kTile - 1) / kTile;
    const int tiles_y = (cam.height + kTile - 1) / kTile;
    std::atomic<long long> nan_count{0};

    parallel_tiles(tiles_x * tiles_y, worker_count(), [&](int tile) {
        const int tx = (tile % tiles_x) * kTile;
        const int ty = (tile / tiles_x) * kTile;
        for (int y = ty; y < std::min(ty + kTile, cam.height); ++y) {
            for (int x = tx; x < std::min(tx + kTile, cam.width); ++x) {
                RGB acc(0.0);
                long long bad = 0;
                for (int s = 0; s < settings.spp; ++s) {
                    const RGB L =
                        detail::trace_path(scene, bvh, settings, cam, x, y, s, nullptr);
                    if (all_finite(L))
                        acc += L;
                    else
                        ++bad;
                }
                img.set_pixel(x, y, acc / static_cast<double>(settings.spp));
                if (bad) nan_count += bad;
            }
        }
    });
    if (stats) stats->nan_samples = nan_count.load();
    return img;
}

std::vector<uint8_t> primary_coverage_mask(const SceneDescription& scene,
                                           const CameraSpec& camera) {
    const CameraModel cam = CameraModel::make(camera);
    SceneBVH bvh;
    bvh.build(scene);
    std::vector<uint8_t> mask(static_cast<size_t>(cam.width) * cam.height, 0);
    const double offs[5][2] = {{0, 0}, {-0.49, -0.49}, {0.49, -0.49}, {-0.49, 0.49}, {0.49, 0.49}};
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            bool covered = true;
            for (const auto& o : offs) {
                const Ray ray = cam.primary_ray(x + o[0], y + o[1]);
                if (!bvh.intersect(ray)) {
                    covered = false;
                    break;
                }
            }
            mask[static_cast<size_t>(y) * cam.width + x] = covered ? 1 : 0;
        }
    return mask;
}

}  // namespace mrd
