#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mrd/image.hpp"

namespace mrd {

struct LatentVector {
    std::vector<double> v;
    int dim() const { return static_cast<int>(v.size()); }
};

LatentVector normalize_to_sphere(const LatentVector& z, double eps = 1e-8);

// Identity-style extractor: block-average pooling then row-major flatten.
struct PixelFlattenSpec {
    int factor = 1;
};

struct ConvLayer {
    int out_ch = 0, in_ch = 0, ksize = 3, stride = 2;
    std::vector<double> w;  // [out][in][ky][kx]
    std::vector<double> b;  // [out]
};

// Small frozen convnet: 3 strided conv + leaky-rectifier stages, global
// average pool, linear projection to a fixed latent dimension.
struct TinyConvNetSpec {
    std::vector<ConvLayer> layers;
    double leaky_slope = 0.1;
    std::vector<double> proj_w;  // [latent_dim][last_ch]
    std::vector<double> proj_b;  // [latent_dim]
    int latent_dim = 0;
};

// LPIPS-style score on top of the convnet: channel-unit-normalized layer
// activations, squared differences, spatial means, nonnegative layer weights.
struct MultiLayerPerceptualSpec {
    TinyConvNetSpec backbone;
    std::vector<double> layer_weights;
};

struct Extractor {
    std::string id;
    std::variant<PixelFlattenSpec, TinyConvNetSpec, MultiLayerPerceptualSpec> spec;

    bool produces_latent() const {
        return !std::holds_alternative<MultiLayerPerceptualSpec>(spec);
    }
};

LatentVector extract(const Extractor& ex, const DisplayImage& img);
// VJP: adjoint on the latent -> gradient on the display pixels (row-major RGB).
std::vector<double> extract_backward(const Extractor& ex, const DisplayImage& img,
                                     const std::vector<double>& dlatent);

double perceptual_distance(const Extractor& ex, const DisplayImage& a, const DisplayImage& b);
// d distance / d a-pixels (b held fixed).
std::vector<double> perceptual_distance_backward(const Extractor& ex, const DisplayImage& a,
                                                 const DisplayImage& b);

// Deterministic frozen weights (seeded generator).
TinyConvNetSpec make_default_tinyconv(uint64_t seed);
constexpr uint64_t kDefaultWeightSeed = 0x4d524457u;  // documented generator seed

void save_weights(const TinyConvNetSpec& net, const std::string& path);
TinyConvNetSpec load_weights(const std::string& path);
uint64_t weights_hash(const TinyConvNetSpec& net);

// Registry of extractor ids used by run configs: "pixflat", "pixflatN"
// (block size N), "tinyconv", "perceptual". `weights_path` overrides the
// generated default backbone weights.
Extractor make_extractor(const std::string& id, const std::string& weights_path = "");

}  // namespace mrd
