#pragma once

#include <memory>
#include <vector>

#include "mrd/mesh.hpp"

namespace mrd {

// A = I + lambda * L with L the uniform (combinatorial) graph Laplacian.
// Vertex arrays are flat interleaved [x0 y0 z0 x1 ...]. Solves are direct
// (sparse Cholesky) below 1e5 vertices, Jacobi-preconditioned CG above.
class LaplacianSystem {
public:
    LaplacianSystem();
    ~LaplacianSystem();
    LaplacianSystem(LaplacianSystem&&) noexcept;
    LaplacianSystem& operator=(LaplacianSystem&&) noexcept;

    // Throws ValidationError listing offending edges for non-manifold input.
    static LaplacianSystem build(const Mesh& mesh, double lambda);

    int vertex_count() const;
    double lambda() const;

    // u = A x
    std::vector<double> to_differential(const std::vector<double>& x) const;
    // solve A x = u; relative residual of the last solve is checked < 1e-8
    std::vector<double> from_differential(const std::vector<double>& u) const;
    double last_residual() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Split every triangle into 4 via deduplicated edge midpoints. Vertex count
// grows by the edge count, faces by 4x; UVs are midpoint-interpolated.
Mesh midpoint_tessellate(const Mesh& mesh);

}  // namespace mrd
