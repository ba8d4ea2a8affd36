#pragma once

#include <array>
#include <string>
#include <vector>

#include "mrd/vec3.hpp"

namespace mrd {

struct Mesh {
    std::vector<Vec3> positions;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> normals;  // per-vertex, unit length
    std::vector<Vec2> uvs;      // optional; empty or one per vertex

    int vertex_count() const { return static_cast<int>(positions.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    bool has_uvs() const { return !uvs.empty(); }

    bool operator==(const Mesh& o) const {
        return positions == o.positions && faces == o.faces && uvs == o.uvs;
    }
};

// Undirected edge with its (up to two) incident faces.
struct MeshEdge {
    int v0, v1;        // v0 < v1
    int f0 = -1, f1 = -1;
};

// Area-weighted vertex normals from current positions.
void recompute_normals(Mesh& mesh);

// Face-index bounds and degenerate-face checks; throws ValidationError.
void validate_mesh(const Mesh& mesh, const std::string& name);

std::vector<MeshEdge> build_edges(const Mesh& mesh);

// Every edge shared by exactly two faces. `offending` (optional) receives the
// violating vertex pairs.
bool is_closed_manifold(const Mesh& mesh, std::vector<std::pair<int, int>>* offending = nullptr);

int euler_characteristic(const Mesh& mesh);

// Faces incident to each vertex (for normal-derivative chains).
std::vector<std::vector<int>> vertex_face_adjacency(const Mesh& mesh);

// Unit icosphere; vertex count 10*4^s + 2. Throws ResourceLimit for s > 8.
Mesh make_icosphere(int subdivisions);

// Axis-aligned square in the XZ plane at the given height, facing +Y.
Mesh make_plane(double y, double size);

void scale_translate(Mesh& mesh, const Vec3& scale, const Vec3& center);

// Wavefront-style ASCII (v/vt/f records, 1-based indices).
Mesh load_obj(const std::string& path);
void save_obj(const Mesh& mesh, const std::string& path);

double bounding_radius(const Mesh& mesh, const Vec3& center);

}  // namespace mrd
