#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mrd/scene.hpp"

namespace mrd {

enum class EntryKind { VertexPositions, BsdfScalar, TextureTexels };

// One named differentiable entry of the scene: a mesh's vertex positions, a
// single bounded BSDF scalar, or a full albedo texture.
struct ParamEntry {
    std::string name;
    EntryKind kind = EntryKind::BsdfScalar;

    std::string object;    // VertexPositions: scene object name
    std::string material;  // BsdfScalar / TextureTexels
    std::string field;     // BsdfScalar: e.g. "roughness", "albedo.r"

    std::vector<double> values;  // 1 / 3V / W*H*3
    int tex_width = 0, tex_height = 0;

    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool open_lo = false;  // exclusive lower bound (eta), nudged on clip

    bool bounded() const { return std::isfinite(lo) || std::isfinite(hi); }
};

// What a run optimizes, as named in run configs.
struct OptimizeTarget {
    enum class Kind { Vertices, BsdfFields, Texture } kind = Kind::BsdfFields;
    std::string name;                 // object name or material id
    std::vector<std::string> fields;  // BsdfFields only; "albedo" expands to 3 channels
};

struct ParameterSet {
    std::vector<ParamEntry> entries;

    int find(const std::string& name) const;
    void validate() const;  // unique names, bounds honored
    // Write parameter values into the scene (recomputes normals of touched
    // meshes).
    void apply(SceneDescription& scene) const;
    // Pull current values out of the scene for the requested targets.
    static ParameterSet from_scene(const SceneDescription& scene,
                                   const std::vector<OptimizeTarget>& targets);
};

struct GradientSet {
    std::vector<std::vector<double>> values;

    static GradientSet zeros_like(const ParameterSet& params);
    bool shape_congruent(const ParameterSet& params) const;
    bool all_finite() const;
    double norm() const;
    void add(const GradientSet& other);
};

// Project every bounded entry into its closed interval; open lower bounds are
// nudged inside by a fixed epsilon. Idempotent.
void clip_params(ParameterSet& params);

// Debug dump: one CSV row per component (entry name, component index, value).
void dump_gradients(const ParameterSet& params, const GradientSet& grads,
                    const std::string& path);

}  // namespace mrd
