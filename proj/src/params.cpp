#include "mrd/params.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "mrd/errors.hpp"

namespace mrd {

namespace {

constexpr double kOpenBoundNudge = 1e-4;

AlbedoMap* material_albedo(Material& mat) {
    if (DiffuseMaterial* d = std::get_if<DiffuseMaterial>(&mat.kind)) return &d->albedo;
    return &std::get<PrincipledMaterial>(mat.kind).base_color;
}

const AlbedoMap* material_albedo(const Material& mat) {
    if (const DiffuseMaterial* d = std::get_if<DiffuseMaterial>(&mat.kind)) return &d->albedo;
    return &std::get<PrincipledMaterial>(mat.kind).base_color;
}

// scalar field access by name; returns nullptr if unknown
double* scalar_field(Material& mat, const std::string& field) {
    const bool albedo_channel =
        field == "albedo.r" || field == "albedo.g" || field == "albedo.b" ||
        field == "base_color.r" || field == "base_color.g" || field == "base_color.b";
    if (albedo_channel) {
        AlbedoMap* map = material_albedo(mat);
        RGB* c = std::get_if<RGB>(map);
        if (!c) return nullptr;
        const char ch = field.back();
        return ch == 'r' ? &c->x : (ch == 'g' ? &c->y : &c->z);
    }
    PrincipledMaterial* p = std::get_if<PrincipledMaterial>(&mat.kind);
    if (!p) return nullptr;
    if (field == "roughness") return &p->roughness;
    if (field == "metallic") return &p->metallic;
    if (field == "spec_trans") return &p->spec_trans;
    if (field == "eta") return &p->eta;
    if (field == "anisotropy") return &p->anisotropy;
    return nullptr;
}

void field_bounds(const std::string& field, double& lo, double& hi, bool& open_lo) {
    open_lo = false;
    if (field == "eta") {
        lo = 1.0;
        hi = 3.0;
        open_lo = true;
    } else {
        lo = 0.0;
        hi = 1.0;
    }
}

}  // namespace

int ParameterSet::find(const std::string& name) const {
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name) return static_cast<int>(i);
    return -1;
}

void ParameterSet::validate() const {
    std::set<std::string> names;
    for (const auto& e : entries) {
        if (!names.insert(e.name).second)
            throw ValidationError("parameter entry name not unique: '" + e.name + "'");
        for (double v : e.values) {
            if (!std::isfinite(v))
                throw ValidationError("parameter entry '" + e.name + "' has non-finite value");
            if (e.bounded() && (v < e.lo || v > e.hi || (e.open_lo && v <= e.lo)))
                throw ValidationError("parameter entry '" + e.name + "' out of bounds");
        }
        if (e.kind == EntryKind::TextureTexels &&
            e.values.size() != static_cast<size_t>(3) * e.tex_width * e.tex_height)
            throw ValidationError("parameter entry '" + e.name + "' texture shape mismatch");
    }
}

void ParameterSet::apply(SceneDescription& scene) const {
    for (const auto& e : entries) {
        switch (e.kind) {
            case EntryKind::VertexPositions: {
                const int oi = scene.object_index(e.object);
                if (oi < 0) throw ValidationError("parameter '" + e.name + "': unknown object");
                Mesh& mesh = scene.objects[oi].mesh;
                if (e.values.size() != 3 * mesh.positions.size())
                    throw ValidationError("parameter '" + e.name + "': vertex count mismatch");
                for (size_t v = 0; v < mesh.positions.size(); ++v)
                    mesh.positions[v] = {e.values[3 * v], e.values[3 * v + 1],
                                         e.values[3 * v + 2]};
                recompute_normals(mesh);
                break;
            }
            case EntryKind::BsdfScalar: {
                const int mi = scene.material_index(e.material);
                if (mi < 0) throw ValidationError("parameter '" + e.name + "': unknown material");
                double* f = scalar_field(scene.materials[mi], e.field);
                if (!f)
                    throw ValidationError("parameter '" + e.name + "': field '" + e.field +
                                          "' not present on material");
                *f = e.values[0];
                break;
            }
            case EntryKind::TextureTexels: {
                const int mi = scene.material_index(e.material);
                if (mi < 0) throw ValidationError("parameter '" + e.name + "': unknown material");
                AlbedoMap* map = material_albedo(scene.materials[mi]);
                ImageTex* tex = std::get_if<ImageTex>(map);
                if (!tex)
                    throw ValidationError("parameter '" + e.name +
                                          "': material albedo is not a texture");
                if (tex->width != e.tex_width || tex->height != e.tex_height)
                    throw ValidationError("parameter '" + e.name + "': texture shape mismatch");
                tex->data = e.values;
                break;
            }
        }
    }
}

ParameterSet ParameterSet::from_scene(const SceneDescription& scene,
                                      const std::vector<OptimizeTarget>& targets) {
    ParameterSet ps;
    for (const auto& t : targets) {
        switch (t.kind) {
            case OptimizeTarget::Kind::Vertices: {
                const int oi = scene.object_index(t.name);
                if (oi < 0) throw ValidationError("optimize target: unknown object '" + t.name + "'");
                const Mesh& mesh = scene.objects[oi].mesh;
                ParamEntry e;
                e.name = "vertices:" + t.name;
                e.kind = EntryKind::VertexPositions;
                e.object = t.name;
                e.values.reserve(3 * mesh.positions.size());
                for (const auto& p : mesh.positions) {
                    e.values.push_back(p.x);
                    e.values.push_back(p.y);
                    e.values.push_back(p.z);
                }
                ps.entries.push_back(std::move(e));
                break;
            }
            case OptimizeTarget::Kind::BsdfFields: {
                const int mi = scene.material_index(t.name);
                if (mi < 0)
                    throw ValidationError("optimize target: unknown material '" + t.name + "'");
                Material mat = scene.materials[mi];  // local copy for field reads
                std::vector<std::string> fields;
                for (const auto& f : t.fields) {
                    if (f == "albedo" || f == "base_color") {
                        const std::string base = f;
                        fields.push_back(base + ".r");
                        fields.push_back(base + ".g");
                        fields.push_back(base + ".b");
                    } else {
                        fields.push_back(f);
                    }
                }
                for (const auto& f : fields) {
                    double* v = scalar_field(mat, f);
                    if (!v)
                        throw ValidationError("optimize target '" + t.name + "': field '" + f +
                                              "' not present");
                    ParamEntry e;
                    e.name = "bsdf:" + t.name + ":" + f;
                    e.kind = EntryKind::BsdfScalar;
                    e.material = t.name;
                    e.field = f;
                    e.values = {*v};
                    field_bounds(f, e.lo, e.hi, e.open_lo);
                    ps.entries.push_back(std::move(e));
                }
                break;
            }
            case OptimizeTarget::Kind::Texture: {
                const int mi = scene.material_index(t.name);
                if (mi < 0)
                    throw ValidationError("optimize target: unknown material '" + t.name + "'");
                const AlbedoMap* map = material_albedo(scene.materials[mi]);
                const ImageTex* tex = std::get_if<ImageTex>(map);
                if (!tex)
                    throw ValidationError("optimize target '" + t.name +
                                          "': material albedo is not a texture");
                ParamEntry e;
                e.name = "texture:" + t.name;
                e.kind = EntryKind::TextureTexels;
                e.material = t.name;
                e.tex_width = tex->width;
                e.tex_height = tex->height;
                e.values = tex->data;
                e.lo = 0.0;
                e.hi = 1.0;
                ps.entries.push_back(std::move(e));
                break;
            }
        }
    }
    ps.validate();
    return ps;
}

GradientSet GradientSet::zeros_like(const ParameterSet& params) {
    GradientSet g;
    g.values.reserve(params.entries.size());
    for (const auto& e : params.entries) g.values.emplace_back(e.values.size(), 0.0);
    return g;
}

bool GradientSet::shape_congruent(const ParameterSet& params) const {
    if (values.size() != params.entries.size()) return false;
    for (size_t i = 0; i < values.size(); ++i)
        if (values[i].size() != params.entries[i].values.size()) return false;
    return true;
}

bool GradientSet::all_finite() const {
    for (const auto& e : values)
        for (double v : e)
            if (!std::isfinite(v)) return false;
    return true;
}

double GradientSet::norm() const {
    double s = 0.0;
    for (const auto& e : values)
        for (double v : e) s += v * v;
    return std::sqrt(s);
}

void GradientSet::add(const GradientSet& other) {
    for (size_t i = 0; i < values.size(); ++i)
        for (size_t j = 0; j < values[i].size(); ++j) values[i][j] += other.values[i][j];
}

void clip_params(ParameterSet& params) {
    for (auto& e : params.entries) {
        if (!e.bounded()) continue;
        for (double& v : e.values) {
            v = std::clamp(v, e.lo, e.hi);
            if (e.open_lo && v <= e.lo) v = e.lo + kOpenBoundNudge;
        }
    }
}

void dump_gradients(const ParameterSet& params, const GradientSet& grads,
                    const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "entry,component,value\n";
    char buf[64];
    for (size_t i = 0; i < params.entries.size(); ++i)
        for (size_t j = 0; j < grads.values[i].size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", grads.values[i][j]);
            f << params.entries[i].name << "," << j << "," << buf << "\n";
        }
}

}  // namespace mrd
