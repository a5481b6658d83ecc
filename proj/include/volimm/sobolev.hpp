#pragma once

#include <cmath>

#include "volimm/geometry.hpp"
#include "volimm/solvers.hpp"

namespace volimm {

inline constexpr int kMaxSobolevOrder = 8;

inline void validate_order(int l) {
    if (l < 0 || l > kMaxSobolevOrder)
        throw RangeError("Sobolev order must lie in [0, " +
                         std::to_string(kMaxSobolevOrder) + "], got " + std::to_string(l));
}

namespace detail {

// Metric entries constant across the grid (constant-speed curves, flat
// identity maps): operators diagonalize in Fourier space.
inline bool metric_is_constant(const GeometryCache& c, double rel_tol = 1e-12) {
    double scale = 0.0, dev = 0.0;
    for (int k = 0; k < c.metric.packed_count(); ++k) {
        const auto& v = c.metric.g_packed(k);
        for (double t : v) {
            scale = std::max(scale, std::abs(t));
            dev = std::max(dev, std::abs(t - v[0]));
        }
    }
    return dev <= rel_tol * scale;
}

// Symbol of the composed discrete Laplacian at a mode: -g^{ab} k_a k_b with
// the odd-derivative Nyquist zeroing baked in by the caller.
inline double metric_ksq(const GeometryCache& c, std::size_t node, double k1, double k2) {
    double q = c.metric.ginv(node, 0, 0) * k1 * k1;
    if (c.d == 2)
        q += 2.0 * c.metric.ginv(node, 0, 1) * k1 * k2 + c.metric.ginv(node, 1, 1) * k2 * k2;
    return q;
}

// Mean inverse-metric symbol used by the Fourier preconditioners.
struct MeanSymbol {
    double gi11 = 0.0, gi12 = 0.0, gi22 = 0.0, sqrtg = 0.0;
    explicit MeanSymbol(const GeometryCache& c) {
        const std::size_t nn = c.grid.nodes();
        for (std::size_t i = 0; i < nn; ++i) {
            gi11 += c.metric.ginv(i, 0, 0);
            if (c.d == 2) {
                gi12 += c.metric.ginv(i, 0, 1);
                gi22 += c.metric.ginv(i, 1, 1);
            }
            sqrtg += c.metric.sqrt_det(i);
        }
        gi11 /= nn; gi12 /= nn; gi22 /= nn; sqrtg /= nn;
    }
    double ksq(double k1, double k2) const {
        return gi11 * k1 * k1 + 2.0 * gi12 * k1 * k2 + gi22 * k2 * k2;
    }
};

// Nyquist-aware integer-to-scaled wavenumbers for multiplier callbacks: the
// composed first-derivative operators drop the Nyquist mode, so the
// diagonal fast paths must do the same to stay exact inverses.
template <typename F>
inline auto nyquist_zeroed(const ParamGrid& g, F&& f) {
    const int n1 = g.size(0);
    const int n2 = g.dim() == 2 ? g.size(1) : 0;
    const double s1 = 2.0 * std::numbers::pi / g.period(0);
    const double s2 = g.dim() == 2 ? 2.0 * std::numbers::pi / g.period(1) : 0.0;
    return [=, n1_2 = n1 / 2, n2_2 = n2 / 2](double k1, double k2) {
        if (std::abs(std::abs(k1) - n1_2 * s1) < 0.5 * s1) k1 = 0.0;
        if (s2 > 0 && std::abs(k2 - n2_2 * s2) < 0.5 * s2) k2 = 0.0;
        return f(k1, k2);
    };
}

inline ScalarField comp_view(const VecField& v, int c) {
    ScalarField s(v.grid());
    std::copy(v.comp(c).begin(), v.comp(c).end(), s.begin());
    return s;
}

} // namespace detail

// One factor (1 + Delta_B) with the positive Bochner Laplacian
// Delta_B = -div grad, acting componentwise (flat targets).
inline TangentField apply_one_plus_laplacian(const GeometryCache& c, const TangentField& h) {
    TangentField out = h;
    for (int comp = 0; comp < h.comps(); ++comp) {
        ScalarField s = detail::comp_view(h, comp);
        ScalarField lap = laplace_beltrami(c, s);
        auto o = out.comp(comp);
        for (std::size_t i = 0; i < h.nodes(); ++i) o[i] -= lap[i];
    }
    return out;
}

// L = (1 + Delta_B)^l.
inline TangentField apply_L(const GeometryCache& c, const TangentField& h, int l) {
    validate_order(l);
    TangentField out = h;
    for (int i = 0; i < l; ++i) out = apply_one_plus_laplacian(c, out);
    return out;
}

// Solve L u = h. Constant-metric bases (constant-speed curves, flat tori)
// invert mode by mode; otherwise preconditioned CG on the symmetrized
// operator sqrt|g| L.
inline std::pair<TangentField, OperatorStats> invert_L(const GeometryCache& c,
                                                       const TangentField& h, int l,
                                                       double tol = 1e-12) {
    validate_order(l);
    if (l == 0) return {h, OperatorStats{}};

    if (detail::metric_is_constant(c)) {
        TangentField out(c.grid, h.comps());
        auto mult = detail::nyquist_zeroed(c.grid, [&](double k1, double k2) {
            return 1.0 / std::pow(1.0 + detail::metric_ksq(c, 0, k1, k2), l);
        });
        for (int comp = 0; comp < h.comps(); ++comp) {
            ScalarField s = spectral::apply_multiplier(detail::comp_view(h, comp), mult);
            std::copy(s.begin(), s.end(), out.comp(comp).begin());
        }
        return {std::move(out), OperatorStats{}};
    }

    const detail::MeanSymbol sym(c);
    auto precond_mult = detail::nyquist_zeroed(c.grid, [&, l](double k1, double k2) {
        return 1.0 / (sym.sqrtg * std::pow(1.0 + sym.ksq(k1, k2), l));
    });
    std::function<TangentField(const TangentField&)> apply = [&, l](const TangentField& u) {
        TangentField lu = apply_L(c, u, l);
        for (int comp = 0; comp < lu.comps(); ++comp) {
            auto plane = lu.comp(comp);
            for (std::size_t i = 0; i < lu.nodes(); ++i) plane[i] *= c.metric.sqrt_det(i);
        }
        return lu;
    };
    std::function<TangentField(const TangentField&)> precond = [&](const TangentField& r) {
        TangentField out(c.grid, r.comps());
        for (int comp = 0; comp < r.comps(); ++comp) {
            ScalarField s = spectral::apply_multiplier(detail::comp_view(r, comp), precond_mult);
            std::copy(s.begin(), s.end(), out.comp(comp).begin());
        }
        return out;
    };

    TangentField rhs = h;
    for (int comp = 0; comp < rhs.comps(); ++comp) {
        auto plane = rhs.comp(comp);
        for (std::size_t i = 0; i < rhs.nodes(); ++i) plane[i] *= c.metric.sqrt_det(i);
    }
    const int cap = 10 * static_cast<int>(c.grid.nodes());
    auto [x, stats] = pcg<TangentField>(rhs, apply, precond, tol, cap);

    // honest residual in the metric-weighted norm
    TangentField check = apply_L(c, x, l);
    axpy(-1.0, h, check);
    const double hn = norm_l2_vol(c, h);
    stats.rel_residual = hn > 0 ? norm_l2_vol(c, check) / hn : 0.0;
    if (!stats.converged)
        throw NoConvergenceError("invert_L", stats.iterations, stats.rel_residual);
    return {std::move(x), stats};
}

// G^l(h, k) = int gbar((1+Delta)^l h, k) vol(g), evaluated in the balanced
// form with floor(l/2) factors moved to h and ceil(l/2) to k.
inline double inner_product_Gl(const GeometryCache& c, const TangentField& h,
                               const TangentField& k, int l) {
    validate_order(l);
    TangentField lh = apply_L(c, h, l / 2);
    TangentField lk = apply_L(c, k, l - l / 2);
    return inner_l2_vol(c, lh, lk);
}

// The scalar operator governing the higher-order projection:
// Psi(p) = div^g((L^{-1} w)^T) - gbar(L^{-1} w, Tr S), w = Tf.grad p + p TrS.
inline std::pair<ScalarField, OperatorStats> apply_Psi(const GeometryCache& c,
                                                       const ScalarField& p, int l,
                                                       double tol = 1e-12) {
    validate_order(l);
    TangentField w = span_field(c, p);
    auto [linv, stats] = invert_L(c, w, l, tol);
    TangentSplit s = split_tangent(c, linv);
    ScalarField out = div_g(c, s.top);
    for (std::size_t node = 0; node < c.grid.nodes(); ++node)
        out[node] -= c.dot_target(linv, c.mean_curv, node);
    return {std::move(out), stats};
}

// Empirical Fourier multiplier of Psi at integer mode k on a
// constant-coefficient curve base.
inline double psi_symbol_probe(const GeometryCache& c, int l, int mode) {
    validate_order(l);
    if (c.d != 1 || !detail::metric_is_constant(c))
        throw RangeError("psi_symbol_probe needs a constant-speed curve base");
    if (mode <= 0 || mode >= c.grid.size(0) / 2)
        throw RangeError("probe mode must lie strictly inside the resolved band");
    ScalarField p(c.grid);
    const double w = 2.0 * std::numbers::pi / c.grid.period(0);
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = std::cos(mode * w * c.grid.coord(0, i));
    auto [psi, stats] = apply_Psi(c, p, l, 1e-13);
    auto spec_in = spectral::forward(p);
    auto spec_out = spectral::forward(psi);
    return (spec_out[mode] / spec_in[mode]).real();
}

} // namespace volimm
