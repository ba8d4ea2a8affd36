#include "mrd/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mrd/errors.hpp"

namespace mrd {

void recompute_normals(Mesh& mesh) {
    mesh.normals.assign(mesh.positions.size(), Vec3(0.0));
    for (const auto& f : mesh.faces) {
        const Vec3 n = cross(mesh.positions[f[1]] - mesh.positions[f[0]],
                             mesh.positions[f[2]] - mesh.positions[f[0]]);
        mesh.normals[f[0]] += n;
        mesh.normals[f[1]] += n;
        mesh.normals[f[2]] += n;
    }
    for (auto& n : mesh.normals) {
        const double len = length(n);
        n = len > 1e-20 ? n / len : Vec3(0.0, 1.0, 0.0);
    }
}

void validate_mesh(const Mesh& mesh, const std::string& name) {
    const int v = mesh.vertex_count();
    for (size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        for (int k = 0; k < 3; ++k) {
            if (f[k] < 0 || f[k] >= v)
                throw ValidationError("mesh '" + name + "': face " + std::to_string(i) +
                                      " index out of range");
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw ValidationError("mesh '" + name + "': degenerate face " + std::to_string(i));
    }
    if (!mesh.uvs.empty() && mesh.uvs.size() != mesh.positions.size())
        throw ValidationError("mesh '" + name + "': uv count mismatch");
}

std::vector<MeshEdge> build_edges(const Mesh& mesh) {
    std::map<std::pair<int, int>, int> index;
    std::vector<MeshEdge> edges;
    for (int fi = 0; fi < mesh.face_count(); ++fi) {
        const auto& f = mesh.faces[fi];
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            auto key = std::make_pair(a, b);
            auto it = index.find(key);
            if (it == index.end()) {
                index.emplace(key, static_cast<int>(edges.size()));
                edges.push_back({a, b, fi, -1});
            } else {
                MeshEdge& e = edges[it->second];
                if (e.f1 == -1)
                    e.f1 = fi;
                else
                    e.f1 = -2;  // over-shared edge, flagged non-manifold
            }
        }
    }
    return edges;
}

bool is_closed_manifold(const Mesh& mesh, std::vector<std::pair<int, int>>* offending) {
    bool ok = true;
    for (const auto& e : build_edges(mesh)) {
        if (e.f1 < 0) {
            ok = false;
            if (offending) offending->push_back({e.v0, e.v1});
        }
    }
    return ok;
}

int euler_characteristic(const Mesh& mesh) {
    return mesh.vertex_count() - static_cast<int>(build_edges(mesh).size()) + mesh.face_count();
}

std::vector<std::vector<int>> vertex_face_adjacency(const Mesh& mesh) {
    std::vector<std::vector<int>> adj(mesh.positions.size());
    for (int fi = 0; fi < mesh.face_count(); ++fi)
        for (int k = 0; k < 3; ++k) adj[mesh.faces[fi][k]].push_back(fi);
    return adj;
}

namespace {

Vec2 sphere_uv(const Vec3& p) {
    const double u = 0.5 + std::atan2(p.z, p.x) / kTwoPi;
    const double v = 0.5 - std::asin(std::clamp(p.y, -1.0, 1.0)) / kPi;
    return {u, v};
}

}  // namespace

Mesh make_icosphere(int subdivisions) {
    if (subdivisions < 0) throw InvalidArgument("make_icosphere: negative subdivision level");
    if (subdivisions > 8)
        throw ResourceLimit("make_icosphere: subdivision level " + std::to_string(subdivisions) +
                            " exceeds the supported maximum of 8");

    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    m.positions = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : m.positions) p = normalize(p);
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
               {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
               {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
               {8, 6, 7},  {9, 8, 1}};

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            const int idx = static_cast<int>(m.positions.size());
            m.positions.push_back(normalize(m.positions[a] + m.positions[b]));
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(m.faces.size() * 4);
        for (const auto& f : m.faces) {
            const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        m.faces = std::move(next);
    }

    m.uvs.resize(m.positions.size());
    for (size_t i = 0; i < m.positions.size(); ++i) m.uvs[i] = sphere_uv(m.positions[i]);
    recompute_normals(m);
    return m;
}

Mesh make_plane(double y, double size) {
    const double h = size / 2.0;
    Mesh m;
    m.positions = {{-h, y, -h}, {h, y, -h}, {h, y, h}, {-h, y, h}};
    m.faces = {{0, 2, 1}, {0, 3, 2}};
    m.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    recompute_normals(m);
    return m;
}

void scale_translate(Mesh& mesh, const Vec3& scale, const Vec3& center) {
    for (auto& p : mesh.positions) p = p * scale + center;
    recompute_normals(mesh);
}

Mesh load_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open mesh file: " + path);
    Mesh m;
    std::vector<Vec2> uv_pool;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 p;
            if (!(ss >> p.x >> p.y >> p.z))
                throw ParseError(path + ":" + std::to_string(lineno) + ": malformed vertex");
            m.positions.push_back(p);
        } else if (tag == "vt") {
            Vec2 t;
            if (!(ss >> t.x >> t.y))
                throw ParseError(path + ":" + std::to_string(lineno) + ": malformed uv");
            uv_pool.push_back(t);
        } else if (tag == "f") {
            std::array<int, 3> idx{};
            std::array<int, 3> tidx{-1, -1, -1};
            for (int k = 0; k < 3; ++k) {
                std::string tok;
                if (!(ss >> tok))
                    throw ParseError(path + ":" + std::to_string(lineno) +
                                     ": face needs 3 vertices");
                int vi = 0, ti = 0;
                if (std::sscanf(tok.c_str(), "%d/%d", &vi, &ti) == 2)
                    tidx[k] = ti - 1;
                else if (std::sscanf(tok.c_str(), "%d", &vi) != 1)
                    throw ParseError(path + ":" + std::to_string(lineno) + ": malformed face");
                idx[k] = vi - 1;
            }
            std::string extra;
            if (ss >> extra)
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": only triangle faces are supported");
            m.faces.push_back(idx);
            if (tidx[0] >= 0 && m.uvs.size() != m.positions.size())
                m.uvs.resize(m.positions.size());
            for (int k = 0; k < 3; ++k)
                if (tidx[k] >= 0 && tidx[k] < static_cast<int>(uv_pool.size()))
                    m.uvs[idx[k]] = uv_pool[tidx[k]];
        }
    }
    validate_mesh(m, path);
    recompute_normals(m);
    return m;
}

void save_obj(const Mesh& mesh, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    char buf[128];
    for (const auto& p : mesh.positions) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", p.x, p.y, p.z);
        f << buf;
    }
    for (const auto& t : mesh.uvs) {
        std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", t.x, t.y);
        f << buf;
    }
    const bool uv = mesh.has_uvs();
    for (const auto& face : mesh.faces) {
        if (uv)
            std::snprintf(buf, sizeof(buf), "f %d/%d %d/%d %d/%d\n", face[0] + 1, face[0] + 1,
                          face[1] + 1, face[1] + 1, face[2] + 1, face[2] + 1);
        else
            std::snprintf(buf, sizeof(buf), "f %d %d %d\n", face[0] + 1, face[1] + 1, face[2] + 1);
        f << buf;
    }
}

double bounding_radius(const Mesh& mesh, const Vec3& center) {
    double r2 = 0.0;
    for (const auto& p : mesh.positions) r2 = std::max(r2, length_squared(p - center));
    return std::sqrt(r2);
}

}  // namespace mrd
