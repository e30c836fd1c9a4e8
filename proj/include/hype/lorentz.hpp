#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hype {

// Curvature magnitude c of a manifold with constant curvature -c.
struct Curvature {
    double c = 1.0;

    explicit Curvature(double c_ = 1.0);
    double sqrt_c() const;
};

// Half-aperture constant K of the entailment cone.
struct ConeParams {
    double k = 0.1;

    explicit ConeParams(double k_ = 0.1);
};

// Point on the upper hyperboloid sheet. Coordinates are packed with the n
// space components first and the time coordinate last, so the packed view
// can be handed straight to the raw kernels below.
struct LorentzPoint {
    std::vector<double> coords;

    LorentzPoint() = default;
    LorentzPoint(std::vector<double> space_coords, double time);

    std::size_t dim() const { return coords.size() - 1; }
    std::span<const double> space() const { return {coords.data(), coords.size() - 1}; }
    double time() const { return coords.back(); }
    std::span<const double> packed() const { return coords; }
};

// Origin O = [0, sqrt(1/c)].
LorentzPoint lorentz_origin(std::size_t dim, Curvature curv);

// Lift a space vector onto the hyperboloid: time = sqrt(1/c + |space|^2).
LorentzPoint lift(std::span<const double> space, Curvature curv);

// <x,y>_L = <x_space,y_space> - x_time * y_time.
double lorentz_inner(const LorentzPoint& x, const LorentzPoint& y);

// sqrt(|<x,x>_L|).
double lorentz_norm(const LorentzPoint& x);

// Exponential map at the origin: space = sinh(sqrt(c)|v|)/(sqrt(c)|v|) * v,
// time via lift. The sinh(t)/t factor degrades to 1 for |v| under 1e-12.
LorentzPoint exp_map_origin(std::span<const double> tangent, Curvature curv);

// -sqrt(1/c) * arccosh(-c <x,y>_L), clamped so on-manifold rounding noise
// cannot push the arccosh argument below 1. Validates manifold membership.
double neg_lorentz_distance(const LorentzPoint& x, const LorentzPoint& y, Curvature curv);

// asin(2K / (sqrt(c) |x_space|)), clamped to pi/2 when the argument exceeds
// 1 (a near-origin point spans the widest possible cone).
double half_aperture(const LorentzPoint& x, Curvature curv, ConeParams cone);

// Exterior angle at x between the geodesic O->x and the geodesic x->y.
// Throws degenerate_geometry when x is at the origin or x == y.
double exterior_angle(const LorentzPoint& x, const LorentzPoint& y, Curvature curv);

// Independent check for exterior_angle: computes the triangle O, x, y via
// pairwise distances and the hyperbolic law of cosines, returns pi minus
// the vertex angle at x.
double angle_oracle(const LorentzPoint& x, const LorentzPoint& y, Curvature curv);

// max(0, ext(text, image) - aper(text)).
double entailment_loss(const LorentzPoint& text, const LorentzPoint& image, Curvature curv,
                       ConeParams cone);

// ---------------------------------------------------------------------------
// Raw kernels over packed coordinates (dim space components, then time).
// No validation; callers feed points produced by lift/exp_map_origin.
// These carry the batch-scoring hot loops.

double dot(const double* a, const double* b, std::size_t n);

double lorentz_inner_packed(const double* x, const double* y, std::size_t dim);

double neg_distance_packed(const double* x, const double* y, std::size_t dim, double c);

double half_aperture_packed(const double* x, std::size_t dim, double c, double k);

// Entailment loss with aperture supplied by the caller (it depends on the
// text point alone, so batch loops hoist it). Coincident text/image points
// count as inside the cone.
double entailment_loss_packed(const double* text, const double* image, std::size_t dim, double c,
                              double text_aperture);

// Fills out[0..dim] with the packed exp-mapped point.
void exp_map_origin_packed(const double* tangent, std::size_t dim, double c, double* out);

}  // namespace hype
