#include "mrd/large_steps.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <map>

#include "mrd/errors.hpp"

namespace mrd {

struct LaplacianSystem::Impl {
    Eigen::SparseMatrix<double> A;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    bool use_cg = false;
    double lambda = 0.0;
    mutable double last_residual = 0.0;
};

LaplacianSystem::LaplacianSystem() : impl_(std::make_unique<Impl>()) {}
LaplacianSystem::~LaplacianSystem() = default;
LaplacianSystem::LaplacianSystem(LaplacianSystem&&) noexcept = default;
LaplacianSystem& LaplacianSystem::operator=(LaplacianSystem&&) noexcept = default;

LaplacianSystem LaplacianSystem::build(const Mesh& mesh, double lambda) {
    if (lambda < 0.0) throw InvalidArgument("LaplacianSystem: lambda must be >= 0");
    std::vector<std::pair<int, int>> offending;
    if (!is_closed_manifold(mesh, &offending)) {
        std::string msg = "LaplacianSystem: mesh is not closed-manifold; offending edges:";
        for (size_t i = 0; i < offending.size() && i < 8; ++i)
            msg += " (" + std::to_string(offending[i].first) + "," +
                   std::to_string(offending[i].second) + ")";
        if (offending.size() > 8) msg += " ...";
        throw ValidationError(msg);
    }

    const int v = mesh.vertex_count();
    std::vector<Eigen::Triplet<double>> trips;
    std::vector<int> degree(v, 0);
    const auto edges = build_edges(mesh);
    trips.reserve(edges.size() * 2 + v);
    for (const auto& e : edges) {
        trips.emplace_back(e.v0, e.v1, -lambda);
        trips.emplace_back(e.v1, e.v0, -lambda);
        ++degree[e.v0];
        ++degree[e.v1];
    }
    for (int i = 0; i < v; ++i) trips.emplace_back(i, i, 1.0 + lambda * degree[i]);

    LaplacianSystem sys;
    sys.impl_->lambda = lambda;
    sys.impl_->A.resize(v, v);
    sys.impl_->A.setFromTriplets(trips.begin(), trips.end());
    sys.impl_->use_cg = v > 100000;
    if (sys.impl_->use_cg) {
        sys.impl_->cg.setTolerance(1e-10);
        sys.impl_->cg.compute(sys.impl_->A);
    } else {
        sys.impl_->llt.compute(sys.impl_->A);
        if (sys.impl_->llt.info() != Eigen::Success)
            throw ValidationError("LaplacianSystem: factorization failed");
    }
    return sys;
}

int LaplacianSystem::vertex_count() const { return static_cast<int>(impl_->A.rows()); }
double LaplacianSystem::lambda() const { return impl_->lambda; }
double LaplacianSystem::last_residual() const { return impl_->last_residual; }

namespace {

Eigen::MatrixXd to_matrix(const std::vector<double>& flat, int v, const char* what) {
    if (flat.size() != static_cast<size_t>(3) * v)
        throw InvalidArgument(std::string(what) + ": length mismatch (expected 3*V)");
    Eigen::MatrixXd m(v, 3);
    for (int i = 0; i < v; ++i)
        for (int a = 0; a < 3; ++a) m(i, a) = flat[3 * static_cast<size_t>(i) + a];
    return m;
}

std::vector<double> to_flat(const Eigen::MatrixXd& m) {
    std::vector<double> flat(static_cast<size_t>(3) * m.rows());
    for (int i = 0; i < m.rows(); ++i)
        for (int a = 0; a < 3; ++a) flat[3 * static_cast<size_t>(i) + a] = m(i, a);
    return flat;
}

}  // namespace

std::vector<double> LaplacianSystem::to_differential(const std::vector<double>& x) const {
    const Eigen::MatrixXd xm = to_matrix(x, vertex_count(), "to_differential");
    return to_flat(impl_->A * xm);
}

std::vector<double> LaplacianSystem::from_differential(const std::vector<double>& u) const {
    const Eigen::MatrixXd um = to_matrix(u, vertex_count(), "from_differential");
    Eigen::MatrixXd xm;
    if (impl_->use_cg)
        xm = impl_->cg.solve(um);
    else
        xm = impl_->llt.solve(um);
    const double un = um.norm();
    impl_->last_residual = un > 0.0 ? (impl_->A * xm - um).norm() / un : 0.0;
    if (impl_->last_residual > 1e-8)
        throw ValidationError("LaplacianSystem: solve residual " +
                              std::to_string(impl_->last_residual) + " exceeds 1e-8");
    return to_flat(xm);
}

Mesh midpoint_tessellate(const Mesh& mesh) {
    std::vector<std::pair<int, int>> offending;
    if (!is_closed_manifold(mesh, &offending))
        throw ValidationError("midpoint_tessellate: mesh is not closed-manifold");

    Mesh out;
    out.positions = mesh.positions;
    if (mesh.has_uvs()) out.uvs = mesh.uvs;
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
        const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
        const auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int idx = static_cast<int>(out.positions.size());
        out.positions.push_back((mesh.positions[a] + mesh.positions[b]) * 0.5);
        if (mesh.has_uvs()) out.uvs.push_back((mesh.uvs[a] + mesh.uvs[b]) * 0.5);
        midpoint.emplace(key, idx);
        return idx;
    };
    out.faces.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
        const int a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
        out.faces.push_back({f[0], a, c});
        out.faces.push_back({f[1], b, a});
        out.faces.push_back({f[2], c, b});
        out.faces.push_back({a, b, c});
    }
    recompute_normals(out);
    return out;
}

}  // namespace mrd
