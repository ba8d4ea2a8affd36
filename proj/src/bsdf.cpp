#include "mrd/bsdf.hpp"

#include <cmath>

#include "mrd/dual.hpp"

namespace mrd {

namespace {

using std::abs;
using std::max;
using std::sqrt;

constexpr double kMinAlpha = 1e-3;

// Vector over a generic scalar (double or Dual) for eta-dependent half
// vectors in the transmission lobe.
template <typename S>
struct V3 {
    S x, y, z;
};

template <typename S>
V3<S> make_v3(const Vec3& v) {
    return {S(v.x), S(v.y), S(v.z)};
}

template <typename S>
S dot3(const V3<S>& a, const V3<S>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename S>
V3<S> normalize3(const V3<S>& v) {
    S len = sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    return {v.x / len, v.y / len, v.z / len};
}

// Anisotropic GGX distribution, local frame.
template <typename S>
S ggx_d(const V3<S>& h, const S& ax, const S& ay) {
    S t = h.x * h.x / (ax * ax) + h.y * h.y / (ay * ay) + h.z * h.z;
    if (!(t > 1e-16)) return S(0.0);
    return S(1.0) / (S(kPi) * ax * ay * t * t);
}

// Smith Lambda (separable masking-shadowing).
template <typename S>
S ggx_lambda(const Vec3& w, const S& ax, const S& ay) {
    const double cos2 = w.z * w.z;
    if (cos2 >= 1.0 - 1e-12) return S(0.0);
    S a2 = (ax * w.x) * (ax * w.x) + (ay * w.y) * (ay * w.y);
    return (sqrt(S(1.0) + a2 / S(cos2)) - S(1.0)) * 0.5;
}

// Exact dielectric Fresnel; cos_i >= 0, eta = eta_t / eta_i.
template <typename S>
S fresnel_dielectric(const S& cos_i, const S& eta) {
    S sin2_t = (S(1.0) - cos_i * cos_i) / (eta * eta);
    if (sin2_t > 1.0) return S(1.0);  // total internal reflection
    S cos_t = sqrt(max(S(1.0) - sin2_t, 0.0));
    S r_parl = (eta * cos_i - cos_t) / (eta * cos_i + cos_t);
    S r_perp = (cos_i - eta * cos_t) / (cos_i + eta * cos_t);
    return (r_parl * r_parl + r_perp * r_perp) * 0.5;
}

template <typename S>
void ggx_alphas(const S& roughness, const S& aniso, S& ax, S& ay) {
    S aspect = sqrt(max(S(1.0) - aniso * 0.9, 1e-4));
    S a = max(roughness * roughness, kMinAlpha);
    ax = a / aspect;
    ay = a * aspect;
}

template <typename S>
struct ChannelParams {
    S base;  // this channel's albedo / base color
    S roughness, metallic, spec_trans, eta, anisotropy;
};

// One channel of the reduced principled model:
//   (1-metal)(1-trans) * diffuse
//   + GGX specular with Schlick Fresnel blended toward base by metallic
//   + (1-metal)*trans * GGX transmission (Walter, radiance convention)
template <typename S>
S principled_channel(const ChannelParams<S>& p, bool entering, const Vec3& wo, const Vec3& wi) {
    S ax, ay;
    ggx_alphas(p.roughness, p.anisotropy, ax, ay);
    S eta_rel = entering ? p.eta : S(1.0) / p.eta;

    S f(0.0);
    if (wi.z > 0.0 && wo.z > 0.0) {
        S diffuse_w = (S(1.0) - p.metallic) * (S(1.0) - p.spec_trans);
        f += diffuse_w * p.base * kInvPi;

        const Vec3 h = normalize(wo + wi);
        const double cos_d = abs(dot(wo, h));
        S f0d = (p.eta - 1.0) / (p.eta + 1.0);
        f0d = f0d * f0d;
        S f0 = f0d + (p.base - f0d) * p.metallic;
        S fr = f0 + (S(1.0) - f0) * pow5(S(1.0 - cos_d));
        S d = ggx_d(make_v3<S>(h), ax, ay);
        S g = S(1.0) / (S(1.0) + ggx_lambda(wo, ax, ay) + ggx_lambda(wi, ax, ay));
        f += d * g * fr / (4.0 * abs(wo.z) * abs(wi.z));
    } else if (wi.z < 0.0 && wo.z > 0.0) {
        S trans_w = (S(1.0) - p.metallic) * p.spec_trans;
        if (trans_w > 1e-12) {
            V3<S> h{eta_rel * wi.x + wo.x, eta_rel * wi.y + wo.y, eta_rel * wi.z + wo.z};
            h = normalize3(h);
            if (h.z < 0.0) h = {S(0.0) - h.x, S(0.0) - h.y, S(0.0) - h.z};
            S dot_o = dot3(h, make_v3<S>(wo));
            S dot_i = dot3(h, make_v3<S>(wi));
            if (dot_o * dot_i < 0.0) {
                S fr = fresnel_dielectric(abs(dot_o), eta_rel);
                S d = ggx_d(h, ax, ay);
                S g = S(1.0) / (S(1.0) + ggx_lambda(wo, ax, ay) + ggx_lambda(wi, ax, ay));
                S denom = dot_o + eta_rel * dot_i;
                S ft = abs(dot_o * dot_i) * (S(1.0) - fr) * d * g /
                       (denom * denom * abs(wo.z) * abs(wi.z));
                f += trans_w * p.base * ft / (eta_rel * eta_rel);
            }
        }
    }
    return f;
}

}  // namespace

LocalBsdf local_bsdf(const Material& mat, const Vec2& uv, bool entering) {
    LocalBsdf b;
    b.entering = entering;
    if (const DiffuseMaterial* d = std::get_if<DiffuseMaterial>(&mat.kind)) {
        b.base = eval_albedo(d->albedo, uv);
        b.principled = false;
        return b;
    }
    const PrincipledMaterial& p = std::get<PrincipledMaterial>(mat.kind);
    b.base = eval_albedo(p.base_color, uv);
    b.roughness = p.roughness;
    b.metallic = p.metallic;
    b.spec_trans = p.spec_trans;
    b.eta = p.eta;
    b.anisotropy = p.anisotropy;
    b.principled = true;
    return b;
}

namespace {

struct LobeWeights {
    double diffuse, specular, transmission;
};

LobeWeights lobe_weights(const LocalBsdf& m) {
    if (!m.principled) return {1.0, 0.0, 0.0};
    const double lum = std::max(mean_component(m.base), 0.05);
    double f0d = (m.eta - 1.0) / (m.eta + 1.0);
    f0d *= f0d;
    double wd = (1.0 - m.metallic) * (1.0 - m.spec_trans) * lum;
    double ws = std::max(0.08, f0d + (lum - f0d) * m.metallic);
    double wt = (1.0 - m.metallic) * m.spec_trans * lum;
    const double sum = wd + ws + wt;
    return {wd / sum, ws / sum, wt / sum};
}

double cosine_pdf(const Vec3& wi) { return wi.z > 0.0 ? wi.z * kInvPi : 0.0; }

Vec3 sample_cosine(Pcg32& rng) {
    const double u1 = rng.next_double(), u2 = rng.next_double();
    const double r = std::sqrt(u1), phi = kTwoPi * u2;
    return {r * std::cos(phi), r * std::sin(phi), std::sqrt(std::max(0.0, 1.0 - u1))};
}

Vec3 sample_ggx_h(double ax, double ay, Pcg32& rng) {
    const double u1 = rng.next_double(), u2 = rng.next_double();
    double phi = std::atan2(ay * std::sin(kTwoPi * u2), ax * std::cos(kTwoPi * u2));
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double inv_a2 = cp * cp / (ax * ax) + sp * sp / (ay * ay);
    const double tan2 = u1 / ((1.0 - u1) * inv_a2);
    const double cos_t = 1.0 / std::sqrt(1.0 + tan2);
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    return {sin_t * cp, sin_t * sp, cos_t};
}

double ggx_h_pdf(const LocalBsdf& m, const Vec3& h) {
    double ax, ay;
    ggx_alphas(m.roughness, m.anisotropy, ax, ay);
    return ggx_d(make_v3<double>(h), ax, ay) * std::abs(h.z);
}

std::optional<Vec3> refract_dir(const Vec3& wo, const Vec3& h, double eta_rel) {
    const double cos_i = dot(wo, h);
    const double sin2_t = std::max(0.0, 1.0 - cos_i * cos_i) / (eta_rel * eta_rel);
    if (sin2_t >= 1.0) return std::nullopt;
    const double cos_t = std::sqrt(1.0 - sin2_t);
    return normalize(h * (cos_i / eta_rel - cos_t) - wo / eta_rel);
}

double reflection_pdf(const LocalBsdf& m, const Vec3& wo, const Vec3& wi) {
    if (wi.z <= 0.0 || wo.z <= 0.0) return 0.0;
    const Vec3 h = normalize(wo + wi);
    return ggx_h_pdf(m, h) / (4.0 * std::abs(dot(wo, h)));
}

double transmission_pdf(const LocalBsdf& m, const Vec3& wo, const Vec3& wi) {
    if (wi.z >= 0.0 || wo.z <= 0.0) return 0.0;
    const double eta_rel = m.entering ? m.eta : 1.0 / m.eta;
    Vec3 h = wo + wi * eta_rel;
    const double hl = length(h);
    if (hl < 1e-12) return 0.0;
    h = h / hl;
    if (h.z < 0.0) h = -h;
    const double dot_o = dot(h, wo), dot_i = dot(h, wi);
    if (dot_o * dot_i > 0.0) return 0.0;
    const double denom = dot_o + eta_rel * dot_i;
    if (std::abs(denom) < 1e-12) return 0.0;
    const double jac = eta_rel * eta_rel * std::abs(dot_i) / (denom * denom);
    return ggx_h_pdf(m, h) * jac;
}

}  // namespace

RGB bsdf_eval(const LocalBsdf& m, const Vec3& wo, const Vec3& wi) {
    if (!m.principled) {
        if (wi.z <= 0.0 || wo.z <= 0.0) return RGB(0.0);
        return m.base * kInvPi;
    }
    RGB f;
    for (int c = 0; c < 3; ++c) {
        ChannelParams<double> p{m.base[c], m.roughness, m.metallic,
                                m.spec_trans, m.eta, m.anisotropy};
        f[c] = principled_channel(p, m.entering, wo, wi);
    }
    return f;
}

double bsdf_pdf(const LocalBsdf& m, const Vec3& wo, const Vec3& wi) {
    const LobeWeights lw = lobe_weights(m);
    double pdf = lw.diffuse * cosine_pdf(wi);
    if (m.principled) {
        pdf += lw.specular * reflection_pdf(m, wo, wi);
        if (lw.transmission > 0.0) pdf += lw.transmission * transmission_pdf(m, wo, wi);
    }
    return pdf;
}

std::optional<BsdfSample> bsdf_sample(const LocalBsdf& m, const Vec3& wo, Pcg32& rng) {
    const LobeWeights lw = lobe_weights(m);
    const double pick = rng.next_double();
    Vec3 wi;
    bool transmitted = false;
    if (pick < lw.diffuse) {
        wi = sample_cosine(rng);
    } else if (pick < lw.diffuse + lw.specular) {
        double ax, ay;
        ggx_alphas(m.roughness, m.anisotropy, ax, ay);
        const Vec3 h = sample_ggx_h(ax, ay, rng);
        wi = h * 2.0 * dot(wo, h) - wo;
        if (wi.z <= 0.0) return std::nullopt;
    } else {
        double ax, ay;
        ggx_alphas(m.roughness, m.anisotropy, ax, ay);
        const Vec3 h = sample_ggx_h(ax, ay, rng);
        const double eta_rel = m.entering ? m.eta : 1.0 / m.eta;
        const auto refr = refract_dir(wo, h, eta_rel);
        if (!refr || refr->z >= 0.0) return std::nullopt;
        wi = *refr;
        transmitted = true;
    }
    const double pdf = bsdf_pdf(m, wo, wi);
    if (pdf <= 1e-14) return std::nullopt;
    BsdfSample s;
    s.wi = wi;
    s.pdf = pdf;
    s.f = bsdf_eval(m, wo, wi);
    s.transmitted = transmitted;
    return s;
}

BsdfGrad bsdf_eval_grad(const LocalBsdf& m, const Vec3& wo, const Vec3& wi) {
    BsdfGrad g{};
    if (!m.principled) {
        if (wi.z <= 0.0 || wo.z <= 0.0) return g;
        g.f = m.base * kInvPi;
        g.f_diffuse = g.f;
        for (int c = 0; c < 3; ++c) g.d_base[c] = kInvPi;
        return g;
    }
    using D = Dual<6>;
    for (int c = 0; c < 3; ++c) {
        ChannelParams<D> p;
        p.base = D::seed(m.base[c], 0);
        p.roughness = D::seed(m.roughness, 1);
        p.metallic = D::seed(m.metallic, 2);
        p.spec_trans = D::seed(m.spec_trans, 3);
        p.eta = D::seed(m.eta, 4);
        p.anisotropy = D::seed(m.anisotropy, 5);
        const D f = principled_channel(p, m.entering, wo, wi);
        g.f[c] = f.v;
        g.d_base[c] = f.d[0];
        for (int s = 0; s < 5; ++s) g.d_scalar[s][c] = f.d[s + 1];
    }
    if (wi.z > 0.0 && wo.z > 0.0)
        g.f_diffuse = m.base * ((1.0 - m.metallic) * (1.0 - m.spec_trans) * kInvPi);
    return g;
}

}  // namespace mrd
