#pragma once

#include <optional>
#include <vector>

#include "mrd/scene.hpp"
#include "mrd/vec3.hpp"

namespace mrd {

struct Ray {
    Vec3 o;
    Vec3 d;  // unit
    double t_min = 1e-5;
    double t_max = 1e30;
};

struct Hit {
    double t = 0.0;
    int object = -1;
    int face = -1;
    double b1 = 0.0, b2 = 0.0;  // barycentrics of face vertices 1 and 2
};

// Binned-SAH bounding volume hierarchy over all scene triangles.
class SceneBVH {
public:
    void build(const SceneDescription& scene);

    std::optional<Hit> intersect(const Ray& ray) const;
    bool occluded(const Ray& ray) const;
    bool empty() const { return tris_.empty(); }

private:
    struct Tri {
        Vec3 p0, e1, e2;
        int object, face;
    };
    struct Node {
        Vec3 bmin, bmax;
        int left = -1;    // internal: child index; leaf: first triangle
        int count = 0;    // leaf triangle count (0 for internal)
        int right = -1;
    };

    int build_node(std::vector<int>& order, int begin, int end,
                   const std::vector<Vec3>& centroids, const std::vector<Vec3>& mins,
                   const std::vector<Vec3>& maxs);

    std::vector<Tri> tris_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace mrd
