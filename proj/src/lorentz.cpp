#include "hype/lorentz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hype/errors.hpp"

namespace hype {

namespace {

constexpr double kTinyNorm = 1e-12;

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void require_finite(std::span<const double> v, const char* what) {
    if (!all_finite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

void require_same_dim(const LorentzPoint& x, const LorentzPoint& y, const char* what) {
    if (x.coords.size() != y.coords.size())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

// Membership check scaled by the coordinate magnitudes involved: the
// residual of a correctly lifted point grows with c*|x|^2 times machine
// epsilon, so an absolute threshold would reject legitimate far points.
void require_on_manifold(const LorentzPoint& x, double c, const char* what) {
    double sq = dot(x.coords.data(), x.coords.data(), x.dim());
    double residual = std::fabs(c * (sq - x.time() * x.time()) + 1.0);
    double scale = 1.0 + c * (sq + x.time() * x.time());
    if (!(residual <= 1e-6 * scale))
        throw std::invalid_argument(std::string(what) + ": point is not on the manifold");
}

}  // namespace

Curvature::Curvature(double c_) : c(c_) {
    if (!(std::isfinite(c) && c > 0.0))
        throw std::invalid_argument("Curvature: c must be finite and > 0");
}

double Curvature::sqrt_c() const { return std::sqrt(c); }

ConeParams::ConeParams(double k_) : k(k_) {
    if (!(std::isfinite(k) && k > 0.0))
        throw std::invalid_argument("ConeParams: k must be finite and > 0");
}

LorentzPoint::LorentzPoint(std::vector<double> space_coords, double time)
    : coords(std::move(space_coords)) {
    coords.push_back(time);
}

LorentzPoint lorentz_origin(std::size_t dim, Curvature curv) {
    return LorentzPoint(std::vector<double>(dim, 0.0), std::sqrt(1.0 / curv.c));
}

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

LorentzPoint lift(std::span<const double> space, Curvature curv) {
    require_finite(space, "lift");
    if (space.empty()) throw std::invalid_argument("lift: empty space vector");
    double sq = dot(space.data(), space.data(), space.size());
    return LorentzPoint(std::vector<double>(space.begin(), space.end()),
                        std::sqrt(1.0 / curv.c + sq));
}

double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y) {
    require_same_dim(x, y, "lorentz_inner");
    require_finite(x.coords, "lorentz_inner");
    require_finite(y.coords, "lorentz_inner");
    return lorentz_inner_packed(x.coords.data(), y.coords.data(), x.dim());
}

double lorentz_norm(const LorentzPoint& x) {
    require_finite(x.coords, "lorentz_norm");
    return std::sqrt(std::fabs(lorentz_inner_packed(x.coords.data(), x.coords.data(), x.dim())));
}

double lorentz_inner_packed(const double* x, const double* y, std::size_t dim) {
    return dot(x, y, dim) - x[dim] * y[dim];
}

void exp_map_origin_packed(const double* tangent, std::size_t dim, double c, double* out) {
    double sq = dot(tangent, tangent, dim);
    double norm = std::sqrt(sq);
    double r = std::sqrt(c) * norm;
    double factor = r < kTinyNorm ? 1.0 : std::sinh(r) / r;
    double out_sq = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        out[i] = factor * tangent[i];
        out_sq += out[i] * out[i];
    }
    out[dim] = std::sqrt(1.0 / c + out_sq);
}

LorentzPoint exp_map_origin(std::span<const double> tangent, Curvature curv) {
    require_finite(tangent, "exp_map_origin");
    if (tangent.empty()) throw std::invalid_argument("exp_map_origin: empty tangent vector");
    LorentzPoint p;
    p.coords.resize(tangent.size() + 1);
    exp_map_origin_packed(tangent.data(), tangent.size(), curv.c, p.coords.data());
    return p;
}

double neg_distance_packed(const double* x, const double* y, std::size_t dim, double c) {
    double u = -c * lorentz_inner_packed(x, y, dim);
    u = std::max(u, 1.0);
    return -std::sqrt(1.0 / c) * std::acosh(u);
}

double neg_lorentz_distance(const LorentzPoint& x, const LorentzPoint& y, Curvature curv) {
    require_same_dim(x, y, "neg_lorentz_distance");
    require_on_manifold(x, curv.c, "neg_lorentz_distance");
    require_on_manifold(y, curv.c, "neg_lorentz_distance");
    // Coincident points: the arccosh route would report sqrt(2 * residual)
    // instead of the exact self-distance.
    if (x.coords == y.coords) return 0.0;
    return neg_distance_packed(x.coords.data(), y.coords.data(), x.dim(), curv.c);
}

double half_aperture_packed(const double* x, std::size_t dim, double c, double k) {
    double norm = std::sqrt(dot(x, x, dim));
    double arg = 2.0 * k / (std::sqrt(c) * norm);  // +inf at the origin, clamped below
    return std::asin(std::min(arg, 1.0));
}

double half_aperture(const LorentzPoint& x, Curvature curv, ConeParams cone) {
    require_on_manifold(x, curv.c, "half_aperture");
    return half_aperture_packed(x.coords.data(), x.dim(), curv.c, cone.k);
}

namespace {

// Shared by exterior_angle and entailment_loss_packed. Returns the clamped
// cos of the exterior angle; beta = c <x,y>_L <= -1 for on-manifold pairs.
double exterior_cos(const double* x, const double* y, std::size_t dim, double c, double beta) {
    double x_norm = std::sqrt(dot(x, x, dim));
    double num = y[dim] + x[dim] * beta;
    double den = x_norm * std::sqrt(beta * beta - 1.0);
    return std::clamp(num / den, -1.0, 1.0);
}

}  // namespace

double exterior_angle(const LorentzPoint& x, const LorentzPoint& y, Curvature curv) {
    require_same_dim(x, y, "exterior_angle");
    require_on_manifold(x, curv.c, "exterior_angle");
    require_on_manifold(y, curv.c, "exterior_angle");
    double x_norm = std::sqrt(dot(x.coords.data(), x.coords.data(), x.dim()));
    if (x_norm < kTinyNorm)
        throw degenerate_geometry("exterior_angle: x at the origin has no radial direction");
    double beta = curv.c * lorentz_inner_packed(x.coords.data(), y.coords.data(), x.dim());
    if (beta * beta - 1.0 <= 1e-15)
        throw degenerate_geometry("exterior_angle: x and y coincide");
    return std::acos(exterior_cos(x.coords.data(), y.coords.data(), x.dim(), curv.c, beta));
}

double angle_oracle(const LorentzPoint& x, const LorentzPoint& y, Curvature curv) {
    require_same_dim(x, y, "angle_oracle");
    LorentzPoint origin = lorentz_origin(x.dim(), curv);
    double a = -neg_lorentz_distance(origin, x, curv);
    double b = -neg_lorentz_distance(origin, y, curv);
    double s = -neg_lorentz_distance(x, y, curv);
    if (a < kTinyNorm) throw degenerate_geometry("angle_oracle: x at the origin");
    if (s < kTinyNorm) throw degenerate_geometry("angle_oracle: x and y coincide");
    double rc = curv.sqrt_c();
    double cos_vertex = (std::cosh(rc * a) * std::cosh(rc * s) - std::cosh(rc * b)) /
                        (std::sinh(rc * a) * std::sinh(rc * s));
    cos_vertex = std::clamp(cos_vertex, -1.0, 1.0);
    return std::numbers::pi - std::acos(cos_vertex);
}

double entailment_loss_packed(const double* text, const double* image, std::size_t dim, double c,
                              double text_aperture) {
    double beta = c * lorentz_inner_packed(text, image, dim);
    double gap = beta * beta - 1.0;
    if (gap <= 0.0) return 0.0;  // coincident points sit at the cone apex
    double ext = std::acos(exterior_cos(text, image, dim, c, beta));
    return std::max(0.0, ext - text_aperture);
}

double entailment_loss(const LorentzPoint& text, const LorentzPoint& image, Curvature curv,
                       ConeParams cone) {
    double ext = exterior_angle(text, image, curv);
    double aper = half_aperture(text, curv, cone);
    return std::max(0.0, ext - aper);
}

}  // namespace hype
