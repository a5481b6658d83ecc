#pragma once

#include <cmath>
#include <vector>

#include "volimm/fft.hpp"
#include "volimm/field.hpp"

namespace volimm {

enum class TargetKind { euclidean, flat_torus };

// Sampled immersion f: M -> R^n or f: M -> T^n (flat torus).
//
// Points are represented as f(theta) = A*theta + u(theta) with a constant
// linear part A (n x d) and a periodic displacement u. Euclidean immersions
// of closed manifolds have A = 0; torus-valued maps need A to carry the
// winding (e.g. A = Id for the identity map of T^2), and only the periodic
// part is differentiated spectrally. Velocities along an immersion are
// always plain periodic fields, so time stepping touches only `disp`.
class DiscreteImmersion {
public:
    DiscreteImmersion(const ParamGrid& grid, int target_dim, TargetKind kind,
                      std::vector<double> linear_part, VecField disp,
                      std::vector<double> torus_periods = {})
        : grid_(grid), target_dim_(target_dim), kind_(kind),
          linear_(std::move(linear_part)), disp_(std::move(disp)),
          torus_periods_(std::move(torus_periods)) {
        if (static_cast<int>(linear_.size()) != target_dim * grid.dim())
            throw RangeError("linear part must be target_dim x grid_dim");
        if (disp_.comps() != target_dim || disp_.grid() != grid)
            throw RangeError("displacement field shape mismatch");
        if (kind_ == TargetKind::flat_torus &&
            static_cast<int>(torus_periods_.size()) != target_dim)
            throw RangeError("flat torus targets need one period per component");
        if (!all_finite(disp_)) throw RangeError("immersion has non-finite entries");
    }

    static DiscreteImmersion euclidean(const ParamGrid& grid, VecField points) {
        const int n = points.comps();
        return DiscreteImmersion(grid, n, TargetKind::euclidean,
                                 std::vector<double>(n * grid.dim(), 0.0), std::move(points));
    }

    const ParamGrid& grid() const { return grid_; }
    int target_dim() const { return target_dim_; }
    TargetKind target_kind() const { return kind_; }
    const std::vector<double>& torus_periods() const { return torus_periods_; }

    double linear(int comp, int axis) const { return linear_[comp * grid_.dim() + axis]; }
    const std::vector<double>& linear_part() const { return linear_; }

    const VecField& displacement() const { return disp_; }
    VecField& displacement() { return disp_; }

    // f evaluated at the nodes (linear part included, not wrapped).
    VecField points() const {
        VecField p = disp_;
        for (int c = 0; c < target_dim_; ++c) {
            auto pc = p.comp(c);
            for (std::size_t node = 0; node < grid_.nodes(); ++node)
                for (int a = 0; a < grid_.dim(); ++a)
                    pc[node] += linear(c, a) * grid_.coord(a, node);
        }
        return p;
    }

    // Same, with torus coordinates wrapped into [0, period).
    VecField points_wrapped() const {
        VecField p = points();
        if (kind_ == TargetKind::flat_torus) {
            for (int c = 0; c < target_dim_; ++c) {
                const double tau = torus_periods_[c];
                for (double& x : p.comp(c)) {
                    x = std::fmod(x, tau);
                    if (x < 0) x += tau;
                }
            }
        }
        return p;
    }

    // df/dtheta_axis as a field along f (spectral derivative of the
    // periodic part plus the constant linear part).
    VecField partial(int axis) const {
        VecField d = spectral::derivative(disp_, axis, 1);
        for (int c = 0; c < target_dim_; ++c) {
            const double lin = linear(c, axis);
            if (lin != 0.0)
                for (double& t : d.comp(c)) t += lin;
        }
        return d;
    }

    // Second parameter derivatives; the linear part drops out.
    VecField second_partial(int axis_a, int axis_b) const {
        if (axis_a == axis_b) return spectral::derivative(disp_, axis_a, 2);
        return spectral::derivative(spectral::derivative(disp_, axis_a, 1), axis_b, 1);
    }

    DiscreteImmersion displaced(const VecField& delta, double scale = 1.0) const {
        DiscreteImmersion out = *this;
        axpy(scale, delta, out.disp_);
        return out;
    }

private:
    ParamGrid grid_;
    int target_dim_;
    TargetKind kind_;
    std::vector<double> linear_;
    VecField disp_;
    std::vector<double> torus_periods_;
};

// ---- stock immersions used by scenarios and tests ------------------------

inline DiscreteImmersion make_circle(int n, double radius = 1.0) {
    ParamGrid grid(n);
    VecField pts(grid, 2);
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        const double th = grid.coord(0, i);
        pts.at(0, i) = radius * std::cos(th);
        pts.at(1, i) = radius * std::sin(th);
    }
    return DiscreteImmersion::euclidean(grid, std::move(pts));
}

// Closed curve r(theta) = 1 + eps*cos(m theta) in polar form; a convenient
// non-constant-speed, non-minimal test immersion.
inline DiscreteImmersion make_perturbed_circle(int n, double eps = 0.15, int mode = 2) {
    ParamGrid grid(n);
    VecField pts(grid, 2);
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        const double th = grid.coord(0, i);
        const double r = 1.0 + eps * std::cos(mode * th);
        pts.at(0, i) = r * std::cos(th);
        pts.at(1, i) = r * std::sin(th);
    }
    return DiscreteImmersion::euclidean(grid, std::move(pts));
}

inline DiscreteImmersion make_torus_of_revolution(int n1, int n2, double R = 2.0, double r = 1.0) {
    ParamGrid grid(n1, n2);
    VecField pts(grid, 3);
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        const double u = grid.coord(0, i);
        const double v = grid.coord(1, i);
        pts.at(0, i) = (R + r * std::cos(v)) * std::cos(u);
        pts.at(1, i) = (R + r * std::cos(v)) * std::sin(u);
        pts.at(2, i) = r * std::sin(v);
    }
    return DiscreteImmersion::euclidean(grid, std::move(pts));
}

// Identity map of the flat torus (linear part = Id, zero displacement).
inline DiscreteImmersion make_torus_identity(int n1, int n2,
                                             double p1 = 2.0 * std::numbers::pi,
                                             double p2 = 2.0 * std::numbers::pi) {
    ParamGrid grid(n1, n2, p1, p2);
    std::vector<double> lin{1.0, 0.0, 0.0, 1.0};
    return DiscreteImmersion(grid, 2, TargetKind::flat_torus, std::move(lin),
                             VecField(grid, 2), {p1, p2});
}

} // namespace volimm
