#include "mrd/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mrd/errors.hpp"

namespace mrd {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Textures

RGB eval_albedo(const AlbedoMap& map, const Vec2& uv) {
    if (const RGB* c = std::get_if<RGB>(&map)) return *c;
    if (const CheckerboardTex* cb = std::get_if<CheckerboardTex>(&map)) {
        const long long iu = static_cast<long long>(std::floor(uv.x * cb->scale));
        const long long iv = static_cast<long long>(std::floor(uv.y * cb->scale));
        return ((iu + iv) & 1) == 0 ? cb->color_a : cb->color_b;
    }
    const ImageTex& tex = std::get<ImageTex>(map);
    const TexelFootprint fp = texel_footprint(tex, uv);
    RGB out(0.0);
    for (int k = 0; k < fp.count; ++k) {
        const double* p = &tex.data[3 * static_cast<size_t>(fp.idx[k])];
        out += RGB{p[0], p[1], p[2]} * fp.w[k];
    }
    return out;
}

TexelFootprint texel_footprint(const ImageTex& tex, const Vec2& uv) {
    const double fu = uv.x - std::floor(uv.x);  // wrap
    const double fv = std::clamp(uv.y, 0.0, 1.0);
    const double x = fu * tex.width - 0.5;
    const double y = fv * tex.height - 0.5;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double ax = x - x0, ay = y - y0;

    auto wrap_x = [&](int c) { return ((c % tex.width) + tex.width) % tex.width; };
    auto clamp_y = [&](int r) { return std::clamp(r, 0, tex.height - 1); };

    TexelFootprint fp;
    const int xs[2] = {wrap_x(x0), wrap_x(x0 + 1)};
    const int ys[2] = {clamp_y(y0), clamp_y(y0 + 1)};
    const double wx[2] = {1.0 - ax, ax};
    const double wy[2] = {1.0 - ay, ay};
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const int idx = ys[j] * tex.width + xs[i];
            const double w = wx[i] * wy[j];
            bool merged = false;
            for (int k = 0; k < fp.count; ++k)
                if (fp.idx[k] == idx) {
                    fp.w[k] += w;
                    merged = true;
                    break;
                }
            if (!merged) {
                fp.idx[fp.count] = idx;
                fp.w[fp.count] = w;
                ++fp.count;
            }
        }
    return fp;
}

// ---------------------------------------------------------------------------
// Environment

namespace {

double luminance(const RGB& c) { return 0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z; }

// direction <-> lat-long coordinates, +Y up, row 0 at the zenith
inline void dir_to_uv(const Vec3& d, double rotation, double& u, double& v) {
    const double theta = std::acos(std::clamp(d.y, -1.0, 1.0));
    const double phi = std::atan2(d.z, d.x);
    u = (phi - rotation + kPi) / kTwoPi;
    u -= std::floor(u);
    v = theta / kPi;
}

inline Vec3 uv_to_dir(double u, double v, double rotation) {
    const double phi = u * kTwoPi - kPi + rotation;
    const double theta = v * kPi;
    const double st = std::sin(theta);
    return {st * std::cos(phi), std::cos(theta), st * std::sin(phi)};
}

RGB latlong_lookup(const LatLongEnv& env, double u, double v) {
    const double x = u * env.width - 0.5;
    const double y = std::clamp(v, 0.0, 1.0) * env.height - 0.5;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double ax = x - x0, ay = y - y0;
    auto wrap_x = [&](int c) { return ((c % env.width) + env.width) % env.width; };
    auto clamp_y = [&](int r) { return std::clamp(r, 0, env.height - 1); };
    RGB out(0.0);
    const int xs[2] = {wrap_x(x0), wrap_x(x0 + 1)};
    const int ys[2] = {clamp_y(y0), clamp_y(y0 + 1)};
    const double wx[2] = {1.0 - ax, ax};
    const double wy[2] = {1.0 - ay, ay};
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i) {
            const double* p = &env.data[3 * static_cast<size_t>(ys[j] * env.width + xs[i])];
            out += RGB{p[0], p[1], p[2]} * (wx[i] * wy[j]);
        }
    return out;
}

}  // namespace

void LatLongEnv::prepare() {
    row_cdf.assign(height, 0.0);
    cond_cdf.assign(static_cast<size_t>(width) * height, 0.0);
    double total = 0.0;
    for (int r = 0; r < height; ++r) {
        // weight rows by the solid angle they subtend
        const double c0 = std::cos(kPi * r / height);
        const double c1 = std::cos(kPi * (r + 1) / height);
        const double row_sa = (c0 - c1) * kTwoPi / width;
        double row_sum = 0.0;
        for (int c = 0; c < width; ++c) {
            const double* p = &data[3 * static_cast<size_t>(r * width + c)];
            const double w = std::max(luminance({p[0], p[1], p[2]}), 1e-9) * row_sa;
            row_sum += w;
            cond_cdf[static_cast<size_t>(r) * width + c] = row_sum;
        }
        for (int c = 0; c < width; ++c) cond_cdf[static_cast<size_t>(r) * width + c] /= row_sum;
        total += row_sum;
        row_cdf[r] = total;
    }
    for (auto& v : row_cdf) v /= total;
}

RGB env_eval(const Environment& env, const Vec3& dir) {
    if (const ConstantEnv* c = std::get_if<ConstantEnv>(&env)) return c->radiance;
    const LatLongEnv& ll = std::get<LatLongEnv>(env);
    double u, v;
    dir_to_uv(dir, ll.rotation, u, v);
    return latlong_lookup(ll, u, v);
}

EnvSample env_sample(const Environment& env, const Vec3& n, Pcg32& rng) {
    EnvSample s;
    if (std::get_if<ConstantEnv>(&env)) {
        // cosine-weighted about the shading normal
        const double u1 = rng.next_double(), u2 = rng.next_double();
        const double r = std::sqrt(u1), phi = kTwoPi * u2;
        const Vec3 local{r * std::cos(phi), r * std::sin(phi), std::sqrt(std::max(0.0, 1.0 - u1))};
        const Frame f = Frame::from_normal(n);
        s.dir = f.to_world(local);
        s.pdf = std::max(local.z, 0.0) * kInvPi;
        s.radiance = std::get<ConstantEnv>(env).radiance;
        return s;
    }
    const LatLongEnv& ll = std::get<LatLongEnv>(env);
    const double ur = rng.next_double();
    const int row = static_cast<int>(
        std::lower_bound(ll.row_cdf.begin(), ll.row_cdf.end(), ur) - ll.row_cdf.begin());
    const int r = std::min(row, ll.height - 1);
    const double uc = rng.next_double();
    const double* cbegin = &ll.cond_cdf[static_cast<size_t>(r) * ll.width];
    const int col = std::min(
        static_cast<int>(std::lower_bound(cbegin, cbegin + ll.width, uc) - cbegin), ll.width - 1);

    // uniform in solid angle within the texel
    const double c0 = std::cos(kPi * r / ll.height);
    const double c1 = std::cos(kPi * (r + 1) / ll.height);
    const double cz = c0 + (c1 - c0) * rng.next_double();
    const double theta = std::acos(std::clamp(cz, -1.0, 1.0));
    const double u = (col + rng.next_double()) / ll.width;
    s.dir = uv_to_dir(u, theta / kPi, ll.rotation);
    s.pdf = env_pdf(env, n, s.dir);
    s.radiance = env_eval(env, s.dir);
    return s;
}

double env_pdf(const Environment& env, const Vec3& n, const Vec3& dir) {
    if (std::get_if<ConstantEnv>(&env)) return std::max(dot(n, dir), 0.0) * kInvPi;
    const LatLongEnv& ll = std::get<LatLongEnv>(env);
    double u, v;
    dir_to_uv(dir, ll.rotation, u, v);
    const int r = std::min(static_cast<int>(v * ll.height), ll.height - 1);
    const int c = std::min(static_cast<int>(u * ll.width), ll.width - 1);
    const double row_p = ll.row_cdf[r] - (r > 0 ? ll.row_cdf[r - 1] : 0.0);
    const double* cbegin = &ll.cond_cdf[static_cast<size_t>(r) * ll.width];
    const double col_p = cbegin[c] - (c > 0 ? cbegin[c - 1] : 0.0);
    const double c0 = std::cos(kPi * r / ll.height);
    const double c1 = std::cos(kPi * (r + 1) / ll.height);
    const double texel_sa = (c0 - c1) * kTwoPi / ll.width;
    if (texel_sa <= 0.0) return 0.0;
    return row_p * col_p / texel_sa;
}

LatLongEnv make_gradient_env(int width, int height, const RGB& zenith, const RGB& horizon,
                             const RGB& nadir, double rotation) {
    LatLongEnv env;
    env.width = width;
    env.height = height;
    env.rotation = rotation;
    env.data.resize(static_cast<size_t>(3) * width * height);
    for (int r = 0; r < height; ++r) {
        const double v = (r + 0.5) / height;  // 0 zenith, 1 nadir
        const double y = std::cos(v * kPi);
        const RGB c = y >= 0.0 ? lerp(horizon, zenith, y) : lerp(horizon, nadir, -y);
        for (int col = 0; col < width; ++col) {
            double* p = &env.data[3 * static_cast<size_t>(r * width + col)];
            p[0] = c.x;
            p[1] = c.y;
            p[2] = c.z;
        }
    }
    env.prepare();
    return env;
}

// ---------------------------------------------------------------------------
// Scene

const Material& SceneDescription::material_by_id(const std::string& id) const {
    const int i = material_index(id);
    if (i < 0) throw ValidationError("unknown material id '" + id + "'");
    return materials[i];
}

int SceneDescription::material_index(const std::string& id) const {
    for (size_t i = 0; i < materials.size(); ++i)
        if (materials[i].id == id) return static_cast<int>(i);
    return -1;
}

int SceneDescription::object_index(const std::string& name) const {
    for (size_t i = 0; i < objects.size(); ++i)
        if (objects[i].name == name) return static_cast<int>(i);
    return -1;
}

std::vector<Vec3> fibonacci_camera_origins(int n, double radius, const Vec3& center) {
    if (n < 1) throw InvalidArgument("fibonacci_camera_origins: n must be >= 1");
    if (!(radius > 0.0)) throw InvalidArgument("fibonacci_camera_origins: radius must be > 0");
    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden_angle * i;
        pts.push_back(center + Vec3{r * std::cos(phi), y, r * std::sin(phi)} * radius);
    }
    return pts;
}

// ---------------------------------------------------------------------------
// JSON config

namespace {

Vec3 parse_vec3(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 3)
        throw ValidationError("field '" + field + "' must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void check_unit_interval(double v, const std::string& field) {
    if (!(v >= 0.0 && v <= 1.0))
        throw ValidationError("field '" + field + "' out of range [0, 1]: " + std::to_string(v));
}

void check_rgb01(const RGB& c, const std::string& field) {
    check_unit_interval(c.x, field);
    check_unit_interval(c.y, field);
    check_unit_interval(c.z, field);
}

AlbedoMap parse_albedo(const json& j, const std::string& field) {
    if (j.is_array()) {
        const RGB c = parse_vec3(j, field);
        check_rgb01(c, field);
        return c;
    }
    if (!j.is_object()) throw ValidationError("field '" + field + "' must be a color or object");
    const std::string type = j.value("type", "");
    if (type == "checkerboard") {
        CheckerboardTex cb;
        cb.color_a = parse_vec3(j.at("color_a"), field + ".color_a");
        cb.color_b = parse_vec3(j.at("color_b"), field + ".color_b");
        check_rgb01(cb.color_a, field + ".color_a");
        check_rgb01(cb.color_b, field + ".color_b");
        cb.scale = j.value("scale", 4.0);
        if (!(cb.scale > 0.0)) throw ValidationError("field '" + field + ".scale' must be > 0");
        return cb;
    }
    if (type == "texture") {
        ImageTex tex;
        tex.width = j.at("width").get<int>();
        tex.height = j.at("height").get<int>();
        if (tex.width < 1 || tex.height < 1)
            throw ValidationError("field '" + field + "': texture dimensions must be >= 1");
        tex.data = j.at("data").get<std::vector<double>>();
        if (tex.data.size() != static_cast<size_t>(3) * tex.width * tex.height)
            throw ValidationError("field '" + field + "': texture data size mismatch");
        for (double v : tex.data) check_unit_interval(v, field + ".data");
        return tex;
    }
    throw ValidationError("field '" + field + "': unknown albedo type '" + type + "'");
}

json albedo_to_json(const AlbedoMap& map) {
    if (const RGB* c = std::get_if<RGB>(&map)) return json::array({c->x, c->y, c->z});
    if (const CheckerboardTex* cb = std::get_if<CheckerboardTex>(&map)) {
        return json{{"type", "checkerboard"},
                    {"color_a", {cb->color_a.x, cb->color_a.y, cb->color_a.z}},
                    {"color_b", {cb->color_b.x, cb->color_b.y, cb->color_b.z}},
                    {"scale", cb->scale}};
    }
    const ImageTex& tex = std::get<ImageTex>(map);
    return json{{"type", "texture"}, {"width", tex.width}, {"height", tex.height},
                {"data", tex.data}};
}

Mesh parse_geometry(const json& j, const std::string& name, const std::string& base_dir) {
    const std::string type = j.value("type", "");
    Mesh mesh;
    if (type == "icosphere") {
        mesh = make_icosphere(j.value("subdivisions", 3));
        const double radius = j.value("radius", 1.0);
        Vec3 scale{1, 1, 1}, center{0, 0, 0};
        if (j.contains("scale")) scale = parse_vec3(j["scale"], name + ".scale");
        if (j.contains("center")) center = parse_vec3(j["center"], name + ".center");
        scale_translate(mesh, scale * radius, center);
    } else if (type == "plane") {
        mesh = make_plane(j.value("y", 0.0), j.value("size", 10.0));
    } else if (type == "obj") {
        mesh = load_obj((fs::path(base_dir) / j.at("path").get<std::string>()).string());
    } else if (type == "mesh") {
        const auto verts = j.at("vertices").get<std::vector<double>>();
        const auto faces = j.at("faces").get<std::vector<int>>();
        if (verts.size() % 3 != 0 || faces.size() % 3 != 0)
            throw ValidationError("mesh '" + name + "': vertices/faces must be flat triples");
        mesh.positions.resize(verts.size() / 3);
        for (size_t i = 0; i < mesh.positions.size(); ++i)
            mesh.positions[i] = {verts[3 * i], verts[3 * i + 1], verts[3 * i + 2]};
        mesh.faces.resize(faces.size() / 3);
        for (size_t i = 0; i < mesh.faces.size(); ++i)
            mesh.faces[i] = {faces[3 * i], faces[3 * i + 1], faces[3 * i + 2]};
        if (j.contains("uvs")) {
            const auto uvs = j["uvs"].get<std::vector<double>>();
            if (uvs.size() != 2 * mesh.positions.size())
                throw ValidationError("mesh '" + name + "': uv count mismatch");
            mesh.uvs.resize(mesh.positions.size());
            for (size_t i = 0; i < mesh.uvs.size(); ++i)
                mesh.uvs[i] = {uvs[2 * i], uvs[2 * i + 1]};
        }
        recompute_normals(mesh);
    } else {
        throw ValidationError("mesh '" + name + "': unknown geometry type '" + type + "'");
    }
    validate_mesh(mesh, name);
    return mesh;
}

}  // namespace

SceneDescription load_scene(const std::string& config_text, const std::string& base_dir) {
    json root;
    try {
        root = json::parse(config_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scene config: ") + e.what());
    }
    if (!root.is_object()) throw ValidationError("scene config root must be an object");

    SceneDescription scene;

    if (!root.contains("materials") || !root["materials"].is_object())
        throw ValidationError("field 'materials' missing or not an object");
    for (const auto& [id, jm] : root["materials"].items()) {
        Material mat;
        mat.id = id;
        const std::string type = jm.value("type", "diffuse");
        if (type == "diffuse") {
            DiffuseMaterial d;
            if (jm.contains("albedo")) d.albedo = parse_albedo(jm["albedo"], id + ".albedo");
            mat.kind = d;
        } else if (type == "principled") {
            PrincipledMaterial p;
            if (jm.contains("base_color"))
                p.base_color = parse_albedo(jm["base_color"], id + ".base_color");
            p.roughness = jm.value("roughness", 0.5);
            p.metallic = jm.value("metallic", 0.0);
            p.spec_trans = jm.value("spec_trans", 0.0);
            p.eta = jm.value("eta", 1.5);
            p.anisotropy = jm.value("anisotropy", 0.0);
            check_unit_interval(p.roughness, id + ".roughness");
            check_unit_interval(p.metallic, id + ".metallic");
            check_unit_interval(p.spec_trans, id + ".spec_trans");
            check_unit_interval(p.anisotropy, id + ".anisotropy");
            if (!(p.eta > 1.0 && p.eta <= 3.0))
                throw ValidationError("field '" + id + ".eta' out of range (1, 3]");
            mat.kind = p;
        } else {
            throw ValidationError("material '" + id + "': unknown type '" + type + "'");
        }
        scene.materials.push_back(std::move(mat));
    }

    if (!root.contains("meshes") || !root["meshes"].is_array())
        throw ValidationError("field 'meshes' missing or not an array");
    for (const auto& jm : root["meshes"]) {
        SceneObject obj;
        obj.name = jm.value("name", "object" + std::to_string(scene.objects.size()));
        if (!jm.contains("material"))
            throw ValidationError("mesh '" + obj.name + "': missing field 'material'");
        obj.material = jm["material"].get<std::string>();
        if (scene.material_index(obj.material) < 0)
            throw ValidationError("mesh '" + obj.name + "': unresolved material id '" +
                                  obj.material + "'");
        obj.mesh = parse_geometry(jm.at("geometry"), obj.name, base_dir);
        scene.objects.push_back(std::move(obj));
    }

    if (!root.contains("environment"))
        throw ValidationError("field 'environment' missing");
    {
        const json& je = root["environment"];
        const std::string type = je.value("type", "constant");
        if (type == "constant") {
            ConstantEnv env;
            if (je.contains("radiance")) env.radiance = parse_vec3(je["radiance"], "environment.radiance");
            if (env.radiance.x < 0 || env.radiance.y < 0 || env.radiance.z < 0)
                throw ValidationError("field 'environment.radiance' must be non-negative");
            scene.environment = env;
        } else if (type == "latlong") {
            LatLongEnv env;
            env.rotation = je.value("rotation", 0.0);
            env.width = je.at("width").get<int>();
            env.height = je.at("height").get<int>();
            if (env.width < 1 || env.height < 1)
                throw ValidationError("field 'environment': dimensions must be >= 1");
            env.data = je.at("data").get<std::vector<double>>();
            if (env.data.size() != static_cast<size_t>(3) * env.width * env.height)
                throw ValidationError("field 'environment.data' size mismatch");
            for (double v : env.data)
                if (!(v >= 0.0) || !std::isfinite(v))
                    throw ValidationError("field 'environment.data' must be non-negative finite");
            env.prepare();
            scene.environment = env;
        } else if (type == "gradient") {
            scene.environment = make_gradient_env(
                je.value("width", 32), je.value("height", 16),
                parse_vec3(je.at("zenith"), "environment.zenith"),
                parse_vec3(je.at("horizon"), "environment.horizon"),
                parse_vec3(je.at("nadir"), "environment.nadir"), je.value("rotation", 0.0));
        } else {
            throw ValidationError("field 'environment.type': unknown type '" + type + "'");
        }
    }

    if (!root.contains("cameras"))
        throw ValidationError("field 'cameras' missing");
    const json& jc = root["cameras"];
    auto parse_camera_common = [&](const json& j, CameraSpec& cam, const std::string& field) {
        if (j.contains("up")) cam.up = parse_vec3(j["up"], field + ".up");
        cam.fov_deg = j.value("fov", 45.0);
        cam.width = j.value("width", 64);
        cam.height = j.value("height", 64);
        if (!(cam.fov_deg > 0.0 && cam.fov_deg < 180.0))
            throw ValidationError("field '" + field + ".fov' out of range (0, 180)");
        if (cam.width < 1 || cam.height < 1)
            throw ValidationError("field '" + field + "': resolution must be >= 1x1");
    };
    if (jc.is_array()) {
        for (size_t i = 0; i < jc.size(); ++i) {
            const json& j = jc[i];
            const std::string field = "cameras[" + std::to_string(i) + "]";
            CameraSpec cam;
            cam.origin = parse_vec3(j.at("origin"), field + ".origin");
            cam.look_at = parse_vec3(j.at("look_at"), field + ".look_at");
            parse_camera_common(j, cam, field);
            if (cam.origin == cam.look_at)
                throw ValidationError("field '" + field + "': origin equals look_at");
            scene.cameras.push_back(cam);
        }
    } else if (jc.is_object() && jc.contains("fibonacci")) {
        const json& j = jc["fibonacci"];
        const int count = j.at("count").get<int>();
        Vec3 center{0, 0, 0};
        if (j.contains("center")) center = parse_vec3(j["center"], "cameras.fibonacci.center");
        double radius;
        if (j.contains("radius")) {
            radius = j["radius"].get<double>();
        } else {
            // default: 3x the bounding radius of the scene's objects
            double br = 0.0;
            for (const auto& obj : scene.objects) br = std::max(br, bounding_radius(obj.mesh, center));
            radius = br > 0.0 ? 3.0 * br : 3.0;
        }
        CameraSpec proto;
        proto.look_at = center;
        parse_camera_common(j, proto, "cameras.fibonacci");
        for (const Vec3& origin : fibonacci_camera_origins(count, radius, center)) {
            CameraSpec cam = proto;
            cam.origin = origin;
            const Vec3 dir = normalize(cam.look_at - cam.origin);
            if (std::abs(dot(dir, normalize(cam.up))) > 0.999) cam.up = {1, 0, 0};
            scene.cameras.push_back(cam);
        }
    } else {
        throw ValidationError("field 'cameras' must be an array or a fibonacci rig");
    }
    if (scene.cameras.empty()) throw ValidationError("field 'cameras' is empty");

    return scene;
}

SceneDescription load_scene_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open scene config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return load_scene(ss.str(), fs::path(path).parent_path().string());
}

std::string serialize_scene(const SceneDescription& scene) {
    json root;
    json jmats = json::object();
    for (const auto& mat : scene.materials) {
        json jm;
        if (const DiffuseMaterial* d = std::get_if<DiffuseMaterial>(&mat.kind)) {
            jm["type"] = "diffuse";
            jm["albedo"] = albedo_to_json(d->albedo);
        } else {
            const PrincipledMaterial& p = std::get<PrincipledMaterial>(mat.kind);
            jm["type"] = "principled";
            jm["base_color"] = albedo_to_json(p.base_color);
            jm["roughness"] = p.roughness;
            jm["metallic"] = p.metallic;
            jm["spec_trans"] = p.spec_trans;
            jm["eta"] = p.eta;
            jm["anisotropy"] = p.anisotropy;
        }
        jmats[mat.id] = jm;
    }
    root["materials"] = jmats;

    json jmeshes = json::array();
    for (const auto& obj : scene.objects) {
        json jm;
        jm["name"] = obj.name;
        jm["material"] = obj.material;
        json geo;
        geo["type"] = "mesh";
        std::vector<double> verts;
        verts.reserve(obj.mesh.positions.size() * 3);
        for (const auto& p : obj.mesh.positions) {
            verts.push_back(p.x);
            verts.push_back(p.y);
            verts.push_back(p.z);
        }
        std::vector<int> faces;
        faces.reserve(obj.mesh.faces.size() * 3);
        for (const auto& fc : obj.mesh.faces) {
            faces.push_back(fc[0]);
            faces.push_back(fc[1]);
            faces.push_back(fc[2]);
        }
        geo["vertices"] = verts;
        geo["faces"] = faces;
        if (obj.mesh.has_uvs()) {
            std::vector<double> uvs;
            uvs.reserve(obj.mesh.uvs.size() * 2);
            for (const auto& t : obj.mesh.uvs) {
                uvs.push_back(t.x);
                uvs.push_back(t.y);
            }
            geo["uvs"] = uvs;
        }
        jm["geometry"] = geo;
        jmeshes.push_back(jm);
    }
    root["meshes"] = jmeshes;

    if (const ConstantEnv* c = std::get_if<ConstantEnv>(&scene.environment)) {
        root["environment"] = {{"type", "constant"},
                               {"radiance", {c->radiance.x, c->radiance.y, c->radiance.z}}};
    } else {
        const LatLongEnv& ll = std::get<LatLongEnv>(scene.environment);
        root["environment"] = {{"type", "latlong"}, {"width", ll.width}, {"height", ll.height},
                               {"rotation", ll.rotation}, {"data", ll.data}};
    }

    json jcams = json::array();
    for (const auto& cam : scene.cameras) {
        jcams.push_back({{"origin", {cam.origin.x, cam.origin.y, cam.origin.z}},
                         {"look_at", {cam.look_at.x, cam.look_at.y, cam.look_at.z}},
                         {"up", {cam.up.x, cam.up.y, cam.up.z}},
                         {"fov", cam.fov_deg},
                         {"width", cam.width},
                         {"height", cam.height}});
    }
    root["cameras"] = jcams;

    return root.dump(2);
}

uint64_t content_hash(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t scene_hash(const SceneDescription& scene) { return content_hash(serialize_scene(scene)); }

}  // namespace mrd
