#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mrd/mesh.hpp"
#include "mrd/rng.hpp"
#include "mrd/vec3.hpp"

namespace mrd {

// ---------------------------------------------------------------------------
// Materials

struct CheckerboardTex {
    RGB color_a{0.8, 0.8, 0.8};
    RGB color_b{0.2, 0.2, 0.2};
    double scale = 4.0;
    bool operator==(const CheckerboardTex&) const = default;
};

struct ImageTex {
    int width = 0, height = 0;
    std::vector<double> data;  // row-major RGB in [0, 1]
    bool operator==(const ImageTex&) const = default;
};

using AlbedoMap = std::variant<RGB, CheckerboardTex, ImageTex>;

struct DiffuseMaterial {
    AlbedoMap albedo = RGB{0.5, 0.5, 0.5};
    bool operator==(const DiffuseMaterial&) const = default;
};

// Reduced principled surface model: diffuse base, GGX specular with a
// metallic blend, and GGX specular transmission.
struct PrincipledMaterial {
    AlbedoMap base_color = RGB{0.5, 0.5, 0.5};
    double roughness = 0.5;
    double metallic = 0.0;
    double spec_trans = 0.0;
    double eta = 1.5;
    double anisotropy = 0.0;
    bool operator==(const PrincipledMaterial&) const = default;
};

struct Material {
    std::string id;
    std::variant<DiffuseMaterial, PrincipledMaterial> kind;
    bool operator==(const Material&) const = default;
};

RGB eval_albedo(const AlbedoMap& map, const Vec2& uv);

// Bilinear texel footprint of a lookup (for texel gradients).
struct TexelFootprint {
    int count = 0;
    int idx[4] = {0, 0, 0, 0};  // texel index (row * width + col)
    double w[4] = {0, 0, 0, 0};
};
TexelFootprint texel_footprint(const ImageTex& tex, const Vec2& uv);

// ---------------------------------------------------------------------------
// Environment light

struct ConstantEnv {
    RGB radiance{1.0, 1.0, 1.0};
    bool operator==(const ConstantEnv&) const = default;
};

struct LatLongEnv {
    int width = 0, height = 0;
    std::vector<double> data;  // row-major RGB, row 0 at the zenith
    double rotation = 0.0;     // radians, rotates about +Y

    // sampling tables, built by prepare()
    std::vector<double> row_cdf;
    std::vector<double> cond_cdf;  // height rows of width entries
    void prepare();

    bool operator==(const LatLongEnv& o) const {
        return width == o.width && height == o.height && data == o.data &&
               rotation == o.rotation;
    }
};

using Environment = std::variant<ConstantEnv, LatLongEnv>;

RGB env_eval(const Environment& env, const Vec3& dir);

struct EnvSample {
    Vec3 dir;
    double pdf = 0.0;  // solid-angle density
    RGB radiance;
};

// Next-event sample toward the environment. For a constant environment the
// strategy is cosine-weighted about the shading normal; for lat-long maps it
// is luminance-weighted over texels (normal-independent).
EnvSample env_sample(const Environment& env, const Vec3& n, Pcg32& rng);
double env_pdf(const Environment& env, const Vec3& n, const Vec3& dir);

// Smooth vertical-gradient lat-long map (zenith / horizon / nadir colors).
LatLongEnv make_gradient_env(int width, int height, const RGB& zenith, const RGB& horizon,
                             const RGB& nadir, double rotation = 0.0);

// ---------------------------------------------------------------------------
// Cameras and scene

struct CameraSpec {
    Vec3 origin{0, 0, 4};
    Vec3 look_at{0, 0, 0};
    Vec3 up{0, 1, 0};
    double fov_deg = 45.0;  // vertical
    int width = 64, height = 64;
    bool operator==(const CameraSpec&) const = default;
};

struct SceneObject {
    std::string name;
    std::string material;
    Mesh mesh;
    bool operator==(const SceneObject& o) const {
        return name == o.name && material == o.material && mesh == o.mesh;
    }
};

struct SceneDescription {
    std::vector<SceneObject> objects;
    std::vector<Material> materials;
    Environment environment = ConstantEnv{};
    std::vector<CameraSpec> cameras;

    const Material& material_by_id(const std::string& id) const;
    int material_index(const std::string& id) const;
    int object_index(const std::string& name) const;

    bool operator==(const SceneDescription& o) const {
        return objects == o.objects && materials == o.materials &&
               environment == o.environment && cameras == o.cameras;
    }
};

// Deterministic golden-angle lattice points at `radius` around `center`.
std::vector<Vec3> fibonacci_camera_origins(int n, double radius, const Vec3& center);

// Parse + validate a JSON scene config. `base_dir` resolves relative mesh or
// map paths.
SceneDescription load_scene(const std::string& config_text, const std::string& base_dir = ".");
SceneDescription load_scene_file(const std::string& path);
std::string serialize_scene(const SceneDescription& scene);

uint64_t content_hash(const std::string& bytes);
uint64_t scene_hash(const SceneDescription& scene);

}  // namespace mrd
