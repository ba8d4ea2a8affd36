#include "mrd/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

LatentVector normalize_to_sphere(const LatentVector& z, double eps) {
    double n = 0.0;
    for (double v : z.v) n += v * v;
    n = std::sqrt(n);
    LatentVector out;
    out.v.resize(z.v.size());
    const double s = 1.0 / (n + eps);
    for (size_t i = 0; i < z.v.size(); ++i) out.v[i] = z.v[i] * s;
    return out;
}

namespace {

// channel-major activation block
struct Tensor {
    int ch = 0, h = 0, w = 0;
    std::vector<double> data;
    Tensor() = default;
    Tensor(int c, int hh, int ww) : ch(c), h(hh), w(ww), data(static_cast<size_t>(c) * hh * ww) {}
    double& at(int c, int y, int x) { return data[(static_cast<size_t>(c) * h + y) * w + x]; }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * h + y) * w + x];
    }
};

Tensor from_display(const DisplayImage& img) {
    Tensor t(3, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const RGB c = img.pixel(x, y);
            t.at(0, y, x) = c.x;
            t.at(1, y, x) = c.y;
            t.at(2, y, x) = c.z;
        }
    return t;
}

int conv_out(int n, int k, int s, int p) { return (n + 2 * p - k) / s + 1; }

// stride-s correlation with zero padding k/2
Tensor conv_forward(const Tensor& in, const ConvLayer& l) {
    const int p = l.ksize / 2;
    Tensor out(l.out_ch, conv_out(in.h, l.ksize, l.stride, p), conv_out(in.w, l.ksize, l.stride, p));
    for (int oc = 0; oc < l.out_ch; ++oc)
        for (int oy = 0; oy < out.h; ++oy)
            for (int ox = 0; ox < out.w; ++ox) {
                double acc = l.b[oc];
                for (int ic = 0; ic < l.in_ch; ++ic)
                    for (int ky = 0; ky < l.ksize; ++ky) {
                        const int iy = oy * l.stride + ky - p;
                        if (iy < 0 || iy >= in.h) continue;
                        for (int kx = 0; kx < l.ksize; ++kx) {
                            const int ix = ox * l.stride + kx - p;
                            if (ix < 0 || ix >= in.w) continue;
                            acc += l.w[((static_cast<size_t>(oc) * l.in_ch + ic) * l.ksize + ky) *
                                           l.ksize +
                                       kx] *
                                   in.at(ic, iy, ix);
                        }
                    }
                out.at(oc, oy, ox) = acc;
            }
    return out;
}

// input-gradient of conv_forward (weights frozen)
Tensor conv_backward(const Tensor& in_shape, const ConvLayer& l, const Tensor& dout) {
    const int p = l.ksize / 2;
    Tensor din(in_shape.ch, in_shape.h, in_shape.w);
    for (int oc = 0; oc < l.out_ch; ++oc)
        for (int oy = 0; oy < dout.h; ++oy)
            for (int ox = 0; ox < dout.w; ++ox) {
                const double g = dout.at(oc, oy, ox);
                if (g == 0.0) continue;
                for (int ic = 0; ic < l.in_ch; ++ic)
                    for (int ky = 0; ky < l.ksize; ++ky) {
                        const int iy = oy * l.stride + ky - p;
                        if (iy < 0 || iy >= din.h) continue;
                        for (int kx = 0; kx < l.ksize; ++kx) {
                            const int ix = ox * l.stride + kx - p;
                            if (ix < 0 || ix >= din.w) continue;
                            din.at(ic, iy, ix) +=
                                g * l.w[((static_cast<size_t>(oc) * l.in_ch + ic) * l.ksize + ky) *
                                            l.ksize +
                                        kx];
                        }
                    }
            }
    return din;
}

void leaky_forward(Tensor& t, double slope) {
    for (double& v : t.data)
        if (v < 0.0) v *= slope;
}

// activations after each conv+nonlinearity stage
std::vector<Tensor> backbone_forward(const TinyConvNetSpec& net, const DisplayImage& img) {
    std::vector<Tensor> acts;
    Tensor cur = from_display(img);
    for (const auto& l : net.layers) {
        Tensor pre = conv_forward(cur, l);
        leaky_forward(pre, net.leaky_slope);
        acts.push_back(pre);
        cur = acts.back();
    }
    return acts;
}

// backward through the stack given per-stage post-activation adjoints
std::vector<double> backbone_backward(const TinyConvNetSpec& net, const DisplayImage& img,
                                      std::vector<Tensor> dacts) {
    std::vector<Tensor> acts;
    std::vector<Tensor> pres;  // pre-activation copies for the rectifier mask
    Tensor cur = from_display(img);
    std::vector<Tensor> inputs;
    for (const auto& l : net.layers) {
        inputs.push_back(cur);
        Tensor pre = conv_forward(cur, l);
        pres.push_back(pre);
        leaky_forward(pre, net.leaky_slope);
        acts.push_back(pre);
        cur = acts.back();
    }
    Tensor grad;  // adjoint flowing backward (post-activation space)
    for (int li = static_cast<int>(net.layers.size()) - 1; li >= 0; --li) {
        if (grad.data.empty())
            grad = dacts[li];
        else if (!dacts[li].data.empty())
            for (size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += dacts[li].data[i];
        // rectifier
        for (size_t i = 0; i < grad.data.size(); ++i)
            if (pres[li].data[i] < 0.0) grad.data[i] *= net.leaky_slope;
        grad = conv_backward(inputs[li], net.layers[li], grad);
    }
    return grad.data;  // channel-major 3 x H x W
}

std::vector<double> channel_major_to_pixels(const std::vector<double>& g, int h, int w) {
    std::vector<double> out(static_cast<size_t>(3) * h * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out[3 * (static_cast<size_t>(y) * w + x) + c] =
                    g[(static_cast<size_t>(c) * h + y) * w + x];
    return out;
}

LatentVector tinyconv_extract(const TinyConvNetSpec& net, const DisplayImage& img) {
    const auto acts = backbone_forward(net, img);
    const Tensor& last = acts.back();
    std::vector<double> pooled(last.ch, 0.0);
    const double inv = 1.0 / (static_cast<double>(last.h) * last.w);
    for (int c = 0; c < last.ch; ++c) {
        double s = 0.0;
        for (int y = 0; y < last.h; ++y)
            for (int x = 0; x < last.w; ++x) s += last.at(c, y, x);
        pooled[c] = s * inv;
    }
    LatentVector z;
    z.v.resize(net.latent_dim);
    for (int k = 0; k < net.latent_dim; ++k) {
        double acc = net.proj_b[k];
        for (int c = 0; c < last.ch; ++c)
            acc += net.proj_w[static_cast<size_t>(k) * last.ch + c] * pooled[c];
        z.v[k] = acc;
    }
    return z;
}

std::vector<double> tinyconv_backward(const TinyConvNetSpec& net, const DisplayImage& img,
                                      const std::vector<double>& dlatent) {
    const auto acts = backbone_forward(net, img);
    const Tensor& last = acts.back();
    std::vector<double> dpooled(last.ch, 0.0);
    for (int k = 0; k < net.latent_dim; ++k)
        for (int c = 0; c < last.ch; ++c)
            dpooled[c] += dlatent[k] * net.proj_w[static_cast<size_t>(k) * last.ch + c];
    std::vector<Tensor> dacts(net.layers.size());
    Tensor dlast(last.ch, last.h, last.w);
    const double inv = 1.0 / (static_cast<double>(last.h) * last.w);
    for (int c = 0; c < last.ch; ++c)
        for (int y = 0; y < last.h; ++y)
            for (int x = 0; x < last.w; ++x) dlast.at(c, y, x) = dpooled[c] * inv;
    dacts.back() = dlast;
    return channel_major_to_pixels(backbone_backward(net, img, std::move(dacts)), img.height,
                                   img.width);
}

constexpr double kNormEps = 1e-10;

void unit_normalize_channels(const Tensor& t, Tensor& out, std::vector<double>& norms) {
    out = Tensor(t.ch, t.h, t.w);
    norms.assign(static_cast<size_t>(t.h) * t.w, 0.0);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) {
            double n = 0.0;
            for (int c = 0; c < t.ch; ++c) n += t.at(c, y, x) * t.at(c, y, x);
            n = std::sqrt(n) + kNormEps;
            norms[static_cast<size_t>(y) * t.w + x] = n;
            for (int c = 0; c < t.ch; ++c) out.at(c, y, x) = t.at(c, y, x) / n;
        }
}

}  // namespace

LatentVector extract(const Extractor& ex, const DisplayImage& img) {
    if (const PixelFlattenSpec* pf = std::get_if<PixelFlattenSpec>(&ex.spec)) {
        const int f = std::max(1, pf->factor);
        const int oh = (img.height + f - 1) / f;
        const int ow = (img.width + f - 1) / f;
        LatentVector z;
        z.v.resize(static_cast<size_t>(3) * oh * ow);
        for (int by = 0; by < oh; ++by)
            for (int bx = 0; bx < ow; ++bx) {
                RGB acc(0.0);
                int n = 0;
                for (int y = by * f; y < std::min((by + 1) * f, img.height); ++y)
                    for (int x = bx * f; x < std::min((bx + 1) * f, img.width); ++x) {
                        acc += img.pixel(x, y);
                        ++n;
                    }
                acc /= static_cast<double>(n);
                const size_t i = 3 * (static_cast<size_t>(by) * ow + bx);
                z.v[i] = acc.x;
                z.v[i + 1] = acc.y;
                z.v[i + 2] = acc.z;
            }
        return z;
    }
    if (const TinyConvNetSpec* net = std::get_if<TinyConvNetSpec>(&ex.spec))
        return tinyconv_extract(*net, img);
    throw InvalidArgument("extractor '" + ex.id + "' does not produce a latent vector");
}

std::vector<double> extract_backward(const Extractor& ex, const DisplayImage& img,
                                     const std::vector<double>& dlatent) {
    if (const PixelFlattenSpec* pf = std::get_if<PixelFlattenSpec>(&ex.spec)) {
        const int f = std::max(1, pf->factor);
        const int oh = (img.height + f - 1) / f;
        const int ow = (img.width + f - 1) / f;
        std::vector<double> g(static_cast<size_t>(3) * img.width * img.height, 0.0);
        for (int by = 0; by < oh; ++by)
            for (int bx = 0; bx < ow; ++bx) {
                int n = 0;
                for (int y = by * f; y < std::min((by + 1) * f, img.height); ++y)
                    for (int x = bx * f; x < std::min((bx + 1) * f, img.width); ++x) ++n;
                const size_t i = 3 * (static_cast<size_t>(by) * ow + bx);
                for (int y = by * f; y < std::min((by + 1) * f, img.height); ++y)
                    for (int x = bx * f; x < std::min((bx + 1) * f, img.width); ++x)
                        for (int c = 0; c < 3; ++c)
                            g[3 * (static_cast<size_t>(y) * img.width + x) + c] +=
                                dlatent[i + c] / n;
            }
        return g;
    }
    if (const TinyConvNetSpec* net = std::get_if<TinyConvNetSpec>(&ex.spec))
        return tinyconv_backward(*net, img, dlatent);
    throw InvalidArgument("extractor '" + ex.id + "' does not produce a latent vector");
}

double perceptual_distance(const Extractor& ex, const DisplayImage& a, const DisplayImage& b) {
    const MultiLayerPerceptualSpec* spec = std::get_if<MultiLayerPerceptualSpec>(&ex.spec);
    if (!spec) throw InvalidArgument("extractor '" + ex.id + "' is not perceptual");
    if (a.width != b.width || a.height != b.height)
        throw InvalidArgument("perceptual_distance: image dimensions differ");
    const auto acts_a = backbone_forward(spec->backbone, a);
    const auto acts_b = backbone_forward(spec->backbone, b);
    double dist = 0.0;
    for (size_t l = 0; l < acts_a.size(); ++l) {
        Tensor na, nb;
        std::vector<double> tmp;
        unit_normalize_channels(acts_a[l], na, tmp);
        unit_normalize_channels(acts_b[l], nb, tmp);
        double layer = 0.0;
        for (size_t i = 0; i < na.data.size(); ++i) {
            const double d = na.data[i] - nb.data[i];
            layer += d * d;
        }
        layer /= static_cast<double>(na.h) * na.w;  // spatial mean of channel sums
        dist += spec->layer_weights[l] * layer;
    }
    return dist;
}

std::vector<double> perceptual_distance_backward(const Extractor& ex, const DisplayImage& a,
                                                 const DisplayImage& b) {
    const MultiLayerPerceptualSpec* spec = std::get_if<MultiLayerPerceptualSpec>(&ex.spec);
    if (!spec) throw InvalidArgument("extractor '" + ex.id + "' is not perceptual");
    const auto acts_a = backbone_forward(spec->backbone, a);
    const auto acts_b = backbone_forward(spec->backbone, b);
    std::vector<Tensor> dacts(acts_a.size());
    for (size_t l = 0; l < acts_a.size(); ++l) {
        const Tensor& t = acts_a[l];
        Tensor na, nb;
        std::vector<double> norms_a, norms_b;
        unit_normalize_channels(t, na, norms_a);
        unit_normalize_channels(acts_b[l], nb, norms_b);
        Tensor d(t.ch, t.h, t.w);
        const double scale = 2.0 * spec->layer_weights[l] / (static_cast<double>(t.h) * t.w);
        // d/d u of || u/(|u|+e) - v̂ ||^2 with v̂ fixed
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) {
                const double n = norms_a[static_cast<size_t>(y) * t.w + x];
                double dot_du = 0.0;  // (na - nb) . na
                for (int c = 0; c < t.ch; ++c)
                    dot_du += (na.at(c, y, x) - nb.at(c, y, x)) * na.at(c, y, x);
                for (int c = 0; c < t.ch; ++c) {
                    const double diff = na.at(c, y, x) - nb.at(c, y, x);
                    d.at(c, y, x) = scale * (diff - na.at(c, y, x) * dot_du) / n;
                }
            }
        dacts[l] = std::move(d);
    }
    return channel_major_to_pixels(
        backbone_backward(spec->backbone, a, std::move(dacts)), a.height, a.width);
}

// ---------------------------------------------------------------------------
// Weights

namespace {

double next_uniform(uint64_t& state, double lo, double hi) {
    state = splitmix64(state);
    const double u = static_cast<double>(state >> 11) * (1.0 / 9007199254740992.0);
    return lo + (hi - lo) * u;
}

}  // namespace

TinyConvNetSpec make_default_tinyconv(uint64_t seed) {
    TinyConvNetSpec net;
    net.leaky_slope = 0.1;
    net.latent_dim = 128;
    const int chans[4] = {3, 8, 16, 32};
    uint64_t state = splitmix64(seed ^ 0x746e6379ull);
    for (int li = 0; li < 3; ++li) {
        ConvLayer l;
        l.in_ch = chans[li];
        l.out_ch = chans[li + 1];
        l.ksize = 3;
        l.stride = 2;
        const double s = std::sqrt(6.0 / (l.in_ch * 9 + l.out_ch * 9));
        l.w.resize(static_cast<size_t>(l.out_ch) * l.in_ch * 9);
        for (auto& w : l.w) w = next_uniform(state, -s, s);
        l.b.resize(l.out_ch);
        for (auto& b : l.b) b = next_uniform(state, -0.05, 0.05);
        net.layers.push_back(std::move(l));
    }
    const double s = std::sqrt(6.0 / (32 + net.latent_dim));
    net.proj_w.resize(static_cast<size_t>(net.latent_dim) * 32);
    for (auto& w : net.proj_w) w = next_uniform(state, -s, s);
    net.proj_b.resize(net.latent_dim);
    for (auto& b : net.proj_b) b = next_uniform(state, -0.05, 0.05);
    return net;
}

namespace {

constexpr uint32_t kWeightMagic = 0x5744524du;  // "MRDW" little-endian
constexpr uint32_t kWeightVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const std::string& path) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw ParseError("truncated weight file: " + path);
    return v;
}

void write_floats(std::ofstream& f, const std::vector<double>& v) {
    for (double d : v) write_pod(f, static_cast<float>(d));
}

std::vector<double> read_floats(std::ifstream& f, size_t n, const std::string& path) {
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = read_pod<float>(f, path);
    return out;
}

}  // namespace

void save_weights(const TinyConvNetSpec& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_pod(f, kWeightMagic);
    write_pod(f, kWeightVersion);
    write_pod(f, static_cast<uint32_t>(net.layers.size() + 1));
    write_pod(f, static_cast<float>(net.leaky_slope));
    for (const auto& l : net.layers) {
        write_pod(f, static_cast<uint32_t>(1));  // conv record
        write_pod(f, static_cast<uint32_t>(l.out_ch));
        write_pod(f, static_cast<uint32_t>(l.in_ch));
        write_pod(f, static_cast<uint32_t>(l.ksize));
        write_pod(f, static_cast<uint32_t>(l.stride));
        write_floats(f, l.w);
        write_floats(f, l.b);
    }
    write_pod(f, static_cast<uint32_t>(2));  // linear record
    write_pod(f, static_cast<uint32_t>(net.latent_dim));
    write_pod(f, static_cast<uint32_t>(net.layers.back().out_ch));
    write_floats(f, net.proj_w);
    write_floats(f, net.proj_b);
}

TinyConvNetSpec load_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open weight file: " + path);
    if (read_pod<uint32_t>(f, path) != kWeightMagic)
        throw ParseError("bad magic in weight file: " + path);
    if (read_pod<uint32_t>(f, path) != kWeightVersion)
        throw ParseError("unsupported weight file version: " + path);
    const uint32_t records = read_pod<uint32_t>(f, path);
    TinyConvNetSpec net;
    net.leaky_slope = read_pod<float>(f, path);
    for (uint32_t r = 0; r < records; ++r) {
        const uint32_t tag = read_pod<uint32_t>(f, path);
        if (tag == 1) {
            ConvLayer l;
            l.out_ch = static_cast<int>(read_pod<uint32_t>(f, path));
            l.in_ch = static_cast<int>(read_pod<uint32_t>(f, path));
            l.ksize = static_cast<int>(read_pod<uint32_t>(f, path));
            l.stride = static_cast<int>(read_pod<uint32_t>(f, path));
            if (l.out_ch < 1 || l.in_ch < 1 || l.ksize < 1 || l.stride < 1)
                throw ParseError("weight file shape mismatch: " + path);
            if (!net.layers.empty() && net.layers.back().out_ch != l.in_ch)
                throw ParseError("weight file shape mismatch: " + path);
            l.w = read_floats(f, static_cast<size_t>(l.out_ch) * l.in_ch * l.ksize * l.ksize, path);
            l.b = read_floats(f, l.out_ch, path);
            net.layers.push_back(std::move(l));
        } else if (tag == 2) {
            net.latent_dim = static_cast<int>(read_pod<uint32_t>(f, path));
            const int in = static_cast<int>(read_pod<uint32_t>(f, path));
            if (net.layers.empty() || in != net.layers.back().out_ch)
                throw ParseError("weight file shape mismatch: " + path);
            net.proj_w = read_floats(f, static_cast<size_t>(net.latent_dim) * in, path);
            net.proj_b = read_floats(f, net.latent_dim, path);
        } else {
            throw ParseError("unknown record in weight file: " + path);
        }
    }
    if (net.layers.empty() || net.latent_dim == 0)
        throw ParseError("incomplete weight file: " + path);
    return net;
}

uint64_t weights_hash(const TinyConvNetSpec& net) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& l : net.layers) {
        mix(l.w.data(), l.w.size() * sizeof(double));
        mix(l.b.data(), l.b.size() * sizeof(double));
    }
    mix(net.proj_w.data(), net.proj_w.size() * sizeof(double));
    mix(net.proj_b.data(), net.proj_b.size() * sizeof(double));
    return h;
}

Extractor make_extractor(const std::string& id, const std::string& weights_path) {
    Extractor ex;
    ex.id = id;
    if (id.rfind("pixflat", 0) == 0) {
        PixelFlattenSpec pf;
        pf.factor = id.size() > 7 ? std::max(1, std::atoi(id.c_str() + 7)) : 1;
        ex.spec = pf;
        return ex;
    }
    if (id == "tinyconv") {
        ex.spec = weights_path.empty() ? make_default_tinyconv(kDefaultWeightSeed)
                                       : load_weights(weights_path);
        return ex;
    }
    if (id == "perceptual") {
        MultiLayerPerceptualSpec spec;
        spec.backbone = weights_path.empty() ? make_default_tinyconv(kDefaultWeightSeed)
                                             : load_weights(weights_path);
        spec.layer_weights.assign(spec.backbone.layers.size(),
                                  1.0 / spec.backbone.layers.size());
        ex.spec = spec;
        return ex;
    }
    throw InvalidArgument("unknown extractor id '" + id + "'");
}

}  // namespace mrd
