#pragma once

#include "volimm/geodesics.hpp"
#include "volimm/random_fields.hpp"

namespace volimm {

// Named initial-condition families used by the scenario runner and as test
// fixtures. Velocities are made admissible (tangent to the constraint
// manifold) before a state is handed out.

// Rigid rotation of the unit circle: velocity omega * c'. The exact geodesic
// is c(t, theta) = (cos(theta + omega t), sin(theta + omega t)).
inline GeodesicState make_circle_rotation(int n, double omega) {
    DiscreteImmersion f = make_circle(n);
    TangentField v(f.grid(), 2);
    for (std::size_t i = 0; i < f.grid().nodes(); ++i) {
        const double th = f.grid().coord(0, i);
        v.at(0, i) = -omega * std::sin(th);
        v.at(1, i) = omega * std::cos(th);
    }
    return {std::move(f), std::move(v), 0.0};
}

inline DiscreteImmersion exact_rotation_curve(int n, double omega, double t) {
    ParamGrid grid(n);
    VecField pts(grid, 2);
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        const double th = grid.coord(0, i) + omega * t;
        pts.at(0, i) = std::cos(th);
        pts.at(1, i) = std::sin(th);
    }
    return DiscreteImmersion::euclidean(grid, std::move(pts));
}

// The whip: unit circle with a periodic radial bump velocity
// amplitude * exp((cos(theta - center) - 1) / width^2), projected onto the
// constraint tangent space.
inline GeodesicState make_whip(int n, double amplitude = 0.4, double width = 0.5,
                               double center = 0.0) {
    DiscreteImmersion f = make_circle(n);
    BackgroundDensity mu = BackgroundDensity::from_immersion(f);
    GeometryCache c = build_geometry(f, mu);
    TangentField v(f.grid(), 2);
    for (std::size_t i = 0; i < f.grid().nodes(); ++i) {
        const double th = f.grid().coord(0, i);
        const double bump = amplitude * std::exp((std::cos(th - center) - 1.0) / (width * width));
        v.at(0, i) = bump * std::cos(th);
        v.at(1, i) = bump * std::sin(th);
    }
    ProjectionResult pr = l2_project(c, v, 1e-12);
    return {std::move(f), std::move(pr.h_mu), 0.0};
}

// Torus of revolution with a normal bump velocity, projected.
inline GeodesicState make_surface_bump(int n1, int n2, double R = 2.0, double r = 1.0,
                                       double amplitude = 0.1, double width = 0.8) {
    DiscreteImmersion f = make_torus_of_revolution(n1, n2, R, r);
    BackgroundDensity mu = BackgroundDensity::from_immersion(f);
    GeometryCache c = build_geometry(f, mu);
    TangentField v(f.grid(), 3);
    for (std::size_t i = 0; i < f.grid().nodes(); ++i) {
        const double u = f.grid().coord(0, i);
        const double w = f.grid().coord(1, i);
        const double bump = amplitude *
            std::exp((std::cos(u) - 1.0) / (width * width)) *
            std::exp((std::cos(w) - 1.0) / (width * width));
        v.at(0, i) = bump * std::cos(w) * std::cos(u);
        v.at(1, i) = bump * std::cos(w) * std::sin(u);
        v.at(2, i) = bump * std::sin(w);
    }
    ProjectionResult pr = l2_project(c, v, 1e-12);
    return {std::move(f), std::move(pr.h_mu), 0.0};
}

// Parallel shear flow on the torus: omega = -amplitude * cos(k y), a steady
// Euler state.
inline ScalarField make_shear_vorticity(const ParamGrid& g, double amplitude = 1.0,
                                        int wavenumber = 1) {
    ScalarField w(g);
    for (std::size_t i = 0; i < g.nodes(); ++i)
        w[i] = -amplitude * std::cos(wavenumber * g.coord(1, i));
    return w;
}

// Seeded smooth random vorticity, mean-free and 2/3-band-limited.
inline ScalarField make_random_vorticity(const ParamGrid& g, std::uint64_t seed,
                                         double k0 = 3.0, double amplitude = 1.0) {
    ScalarField w = random_smooth_scalar(g, seed, k0, amplitude);
    auto spec = spectral::forward(w);
    spectral::dealias_two_thirds(g, spec);
    spec[0] = 0.0;
    return spectral::inverse(g, spec);
}

} // namespace volimm
