#pragma once

#include <cmath>
#include <iostream>
#include <vector>

#include "volimm/immersion.hpp"

namespace volimm {

inline constexpr double kEpsRank = 1e-10;  // relative det(g) floor
inline constexpr double kTolOrth = 1e-8;   // normal-bundle orthogonality tolerance

// Pullback metric g = f^* gbar, packed symmetric per node:
// d=1 -> [g11], d=2 -> [g11, g12, g22]; inverse in the same packing.
class MetricField {
public:
    MetricField(const ParamGrid& grid, int d)
        : d_(d), npack_(d * (d + 1) / 2),
          g_(npack_, std::vector<double>(grid.nodes(), 0.0)),
          ginv_(npack_, std::vector<double>(grid.nodes(), 0.0)),
          sqrt_det_(grid.nodes(), 0.0) {}

    int dim() const { return d_; }

    static int pack(int a, int b) {
        if (a > b) std::swap(a, b);
        return a == 0 ? b : 2;  // (0,0)->0, (0,1)->1, (1,1)->2
    }

    double g(std::size_t node, int a, int b) const { return g_[pack(a, b)][node]; }
    double ginv(std::size_t node, int a, int b) const { return ginv_[pack(a, b)][node]; }
    double sqrt_det(std::size_t node) const { return sqrt_det_[node]; }

    std::vector<double>& g_packed(int k) { return g_[k]; }
    const std::vector<double>& g_packed(int k) const { return g_[k]; }
    std::vector<double>& ginv_packed(int k) { return ginv_[k]; }
    std::vector<double>& sqrt_det_vec() { return sqrt_det_; }
    const std::vector<double>& sqrt_det_vec() const { return sqrt_det_; }
    int packed_count() const { return npack_; }

private:
    int d_;
    int npack_;
    std::vector<std::vector<double>> g_;
    std::vector<std::vector<double>> ginv_;
    std::vector<double> sqrt_det_;
};

// Background volume density mu = weight(theta) dtheta.
class BackgroundDensity {
public:
    explicit BackgroundDensity(ScalarField weight) : weight_(std::move(weight)) {
        for (double w : weight_)
            if (!(w > 0.0)) throw RangeError("background density weight must be positive");
    }

    static BackgroundDensity uniform(const ParamGrid& grid, double value = 1.0) {
        return BackgroundDensity(ScalarField(grid, value));
    }

    // The density induced by an immersion, so that rho(f0) == 1. This is the
    // default for scenario runs: trajectories start on the constraint manifold.
    static BackgroundDensity from_immersion(const DiscreteImmersion& f);

    const ScalarField& weight() const { return weight_; }

private:
    ScalarField weight_;
};

// Everything derived from one immersion: metric, volume density ratio,
// second fundamental form, mean curvature vector. Immutable once built.
struct GeometryCache {
    GeometryCache(const ParamGrid& grid, int d, int n, const BackgroundDensity& mu)
        : grid(grid), d(d), n(n), metric(grid, d), rho(grid),
          mu_weight(mu.weight()), mean_curv(grid, n), tr_s_norm_sq(grid) {}

    ParamGrid grid;
    int d;  // source dimension
    int n;  // target dimension
    MetricField metric;
    ScalarField rho;        // sqrt|g| / mu-weight
    ScalarField mu_weight;
    std::vector<VecField> df;           // df[a] = f_{,a}, a < d
    std::vector<VecField> second_fund;  // packed like the metric, n comps each
    VecField mean_curv;                 // Tr^g S (normal-valued)
    ScalarField tr_s_norm_sq;           // |Tr^g S|^2
    double max_tr_s_norm_sq = 0.0;

    bool is_minimal() const { return max_tr_s_norm_sq <= 1e-12; }

    // Pointwise gbar inner product of target vectors at a node.
    double dot_target(const VecField& u, const VecField& v, std::size_t node) const {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += u.at(c, node) * v.at(c, node);
        return s;
    }
};

inline GeometryCache build_geometry(const DiscreteImmersion& f, const BackgroundDensity& mu) {
    const ParamGrid& grid = f.grid();
    const int d = grid.dim();
    const int n = f.target_dim();
    if (mu.weight().grid() != grid) throw RangeError("background density grid mismatch");
    GeometryCache c(grid, d, n, mu);

    for (int a = 0; a < d; ++a) c.df.push_back(f.partial(a));

    // metric, determinant, inverse
    double scale_acc = 0.0;
    for (std::size_t node = 0; node < grid.nodes(); ++node) {
        double g11 = c.dot_target(c.df[0], c.df[0], node);
        c.metric.g_packed(0)[node] = g11;
        double tr = g11;
        if (d == 2) {
            const double g12 = c.dot_target(c.df[0], c.df[1], node);
            const double g22 = c.dot_target(c.df[1], c.df[1], node);
            c.metric.g_packed(1)[node] = g12;
            c.metric.g_packed(2)[node] = g22;
            tr += g22;
        }
        scale_acc += tr / d;
    }
    const double scale = scale_acc / grid.nodes();
    const double det_floor = kEpsRank * std::pow(scale, d);

    std::size_t worst_node = 0;
    double worst_det = std::numeric_limits<double>::max();
    for (std::size_t node = 0; node < grid.nodes(); ++node) {
        double det;
        if (d == 1) {
            det = c.metric.g_packed(0)[node];
            if (det < worst_det) { worst_det = det; worst_node = node; }
            c.metric.ginv_packed(0)[node] = 1.0 / det;
        } else {
            const double g11 = c.metric.g_packed(0)[node];
            const double g12 = c.metric.g_packed(1)[node];
            const double g22 = c.metric.g_packed(2)[node];
            det = g11 * g22 - g12 * g12;
            if (det < worst_det) { worst_det = det; worst_node = node; }
            c.metric.ginv_packed(0)[node] = g22 / det;
            c.metric.ginv_packed(1)[node] = -g12 / det;
            c.metric.ginv_packed(2)[node] = g11 / det;
        }
        c.metric.sqrt_det_vec()[node] = std::sqrt(std::max(det, 0.0));
        c.rho[node] = c.metric.sqrt_det_vec()[node] / c.mu_weight[node];
    }
    if (worst_det <= det_floor)
        throw RankDeficientError(worst_node, worst_det / std::pow(scale, d));

    // Second fundamental form as the normal projection of the second
    // parameter derivatives (Gauss formula with a flat target).
    const int npack = c.metric.packed_count();
    for (int k = 0; k < npack; ++k) {
        const int a = k == 2 ? 1 : 0;
        const int b = k == 0 ? 0 : 1;
        VecField d2 = f.second_partial(a, b);
        for (std::size_t node = 0; node < grid.nodes(); ++node) {
            // tangential coefficients t^e = g^{ec} <d2, f_{,c}>
            double t[2] = {0.0, 0.0};
            for (int e = 0; e < d; ++e)
                for (int cc = 0; cc < d; ++cc)
                    t[e] += c.metric.ginv(node, e, cc) * c.dot_target(d2, c.df[cc], node);
            for (int comp = 0; comp < n; ++comp) {
                double val = d2.at(comp, node);
                for (int e = 0; e < d; ++e) val -= t[e] * c.df[e].at(comp, node);
                d2.at(comp, node) = val;
            }
        }
        c.second_fund.push_back(std::move(d2));
    }

    for (std::size_t node = 0; node < grid.nodes(); ++node) {
        for (int comp = 0; comp < n; ++comp) {
            double h = 0.0;
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    h += c.metric.ginv(node, a, b) *
                         c.second_fund[MetricField::pack(a, b)].at(comp, node);
            c.mean_curv.at(comp, node) = h;
        }
        const double hsq = c.dot_target(c.mean_curv, c.mean_curv, node);
        c.tr_s_norm_sq[node] = hsq;
        c.max_tr_s_norm_sq = std::max(c.max_tr_s_norm_sq, hsq);
    }
    return c;
}

// Just the density ratio rho(f) = sqrt|g| / weight, without the rest of the
// cache; the constrained integrators evaluate this inside Newton loops.
inline ScalarField rho_of(const DiscreteImmersion& f, const BackgroundDensity& mu) {
    const ParamGrid& grid = f.grid();
    const int d = grid.dim();
    std::vector<VecField> df;
    for (int a = 0; a < d; ++a) df.push_back(f.partial(a));
    ScalarField rho(grid);
    for (std::size_t node = 0; node < grid.nodes(); ++node) {
        double det;
        double g11 = 0.0;
        for (int c = 0; c < f.target_dim(); ++c) g11 += df[0].at(c, node) * df[0].at(c, node);
        if (d == 1) {
            det = g11;
        } else {
            double g12 = 0.0, g22 = 0.0;
            for (int c = 0; c < f.target_dim(); ++c) {
                g12 += df[0].at(c, node) * df[1].at(c, node);
                g22 += df[1].at(c, node) * df[1].at(c, node);
            }
            det = g11 * g22 - g12 * g12;
        }
        rho[node] = std::sqrt(std::max(det, 0.0)) / mu.weight()[node];
    }
    return rho;
}

inline BackgroundDensity BackgroundDensity::from_immersion(const DiscreteImmersion& f) {
    GeometryCache c = build_geometry(f, BackgroundDensity::uniform(f.grid()));
    ScalarField w(f.grid());
    std::copy(c.metric.sqrt_det_vec().begin(), c.metric.sqrt_det_vec().end(), w.begin());
    return BackgroundDensity(std::move(w));
}

// ---- integrals and inner products ----------------------------------------

// integral of p against vol(g) = sqrt|g| dtheta
inline double integral_vol(const GeometryCache& c, const ScalarField& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * c.metric.sqrt_det(i);
    return s * c.grid.cell_measure();
}

inline double inner_l2_vol(const GeometryCache& c, const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i] * c.metric.sqrt_det(i);
    return s * c.grid.cell_measure();
}

inline double inner_l2_vol(const GeometryCache& c, const VecField& a, const VecField& b) {
    double s = 0.0;
    for (std::size_t node = 0; node < c.grid.nodes(); ++node)
        s += c.dot_target(a, b, node) * c.metric.sqrt_det(node);
    return s * c.grid.cell_measure();
}

// g-inner product of intrinsic vector fields against vol(g).
inline double inner_l2_metric(const GeometryCache& c, const IntrinsicField& x,
                              const IntrinsicField& y) {
    double s = 0.0;
    for (std::size_t node = 0; node < c.grid.nodes(); ++node) {
        double q = 0.0;
        for (int a = 0; a < c.d; ++a)
            for (int b = 0; b < c.d; ++b)
                q += c.metric.g(node, a, b) * x.at(a, node) * y.at(b, node);
        s += q * c.metric.sqrt_det(node);
    }
    return s * c.grid.cell_measure();
}

inline double norm_l2_vol(const GeometryCache& c, const ScalarField& a) {
    return std::sqrt(inner_l2_vol(c, a, a));
}
inline double norm_l2_vol(const GeometryCache& c, const VecField& a) {
    return std::sqrt(inner_l2_vol(c, a, a));
}

// ---- tangential / normal split -------------------------------------------

struct TangentSplit {
    IntrinsicField top;   // h^T, d components
    TangentField perp;    // h^perp, n components
};

inline TangentSplit split_tangent(const GeometryCache& c, const TangentField& h) {
    if (h.grid() != c.grid || h.comps() != c.n) throw RangeError("split_tangent shape mismatch");
    IntrinsicField top(c.grid, c.d);
    TangentField perp = h;
    for (std::size_t node = 0; node < c.grid.nodes(); ++node) {
        double proj[2] = {0.0, 0.0};
        for (int a = 0; a < c.d; ++a)
            for (int b = 0; b < c.d; ++b)
                proj[a] += c.metric.ginv(node, a, b) * c.dot_target(h, c.df[b], node);
        for (int a = 0; a < c.d; ++a) top.at(a, node) = proj[a];
        for (int comp = 0; comp < c.n; ++comp) {
            double val = h.at(comp, node);
            for (int a = 0; a < c.d; ++a) val -= proj[a] * c.df[a].at(comp, node);
            perp.at(comp, node) = val;
        }
    }
    return {std::move(top), std::move(perp)};
}

// Tf . X for an intrinsic field X (pushforward into the target).
inline TangentField pushforward(const GeometryCache& c, const IntrinsicField& x) {
    TangentField out(c.grid, c.n);
    for (std::size_t node = 0; node < c.grid.nodes(); ++node)
        for (int comp = 0; comp < c.n; ++comp) {
            double val = 0.0;
            for (int a = 0; a < c.d; ++a) val += x.at(a, node) * c.df[a].at(comp, node);
            out.at(comp, node) = val;
        }
    return out;
}

// ---- intrinsic first-order operators --------------------------------------

inline IntrinsicField grad_g(const GeometryCache& c, const ScalarField& p) {
    std::vector<ScalarField> dp;
    for (int a = 0; a < c.d; ++a) dp.push_back(spectral::derivative(p, a, 1));
    IntrinsicField out(c.grid, c.d);
    for (std::size_t node = 0; node < c.grid.nodes(); ++node)
        for (int a = 0; a < c.d; ++a) {
            double val = 0.0;
            for (int b = 0; b < c.d; ++b) val += c.metric.ginv(node, a, b) * dp[b][node];
            out.at(a, node) = val;
        }
    return out;
}

inline ScalarField div_g(const GeometryCache& c, const IntrinsicField& x) {
    ScalarField out(c.grid);
    for (int a = 0; a < c.d; ++a) {
        ScalarField weighted(c.grid);
        for (std::size_t node = 0; node < c.grid.nodes(); ++node)
            weighted[node] = c.metric.sqrt_det(node) * x.at(a, node);
        axpy(1.0, spectral::derivative(weighted, a, 1), out);
    }
    for (std::size_t node = 0; node < c.grid.nodes(); ++node)
        out[node] /= c.metric.sqrt_det(node);
    return out;
}

// Laplace-Beltrami with the analyst sign (nonpositive spectrum), defined as
// the exact composition div_g(grad_g(.)).
inline ScalarField laplace_beltrami(const GeometryCache& c, const ScalarField& p) {
    return div_g(c, grad_g(c, p));
}

// ---- the constraint operator and its adjoint ------------------------------

// A_f(h) = div^g(h^T) - gbar(h^perp, Tr^g S). Vanishes exactly on fields
// tangent to the volume-preserving submanifold.
inline ScalarField constraint_residual(const GeometryCache& c, const TangentField& h,
                                       bool warn_off_constraint = false) {
    if (warn_off_constraint) {
        double dev = 0.0;
        for (std::size_t i = 0; i < c.rho.size(); ++i)
            dev = std::max(dev, std::abs(c.rho[i] - 1.0));
        if (dev > 1e-6)
            std::clog << "volimm: constraint_residual evaluated off the constraint manifold "
                         "(max|rho-1| = " << dev << ")\n";
    }
    TangentSplit s = split_tangent(c, h);
    ScalarField out = div_g(c, s.top);
    for (std::size_t node = 0; node < c.grid.nodes(); ++node)
        out[node] -= c.dot_target(s.perp, c.mean_curv, node);
    return out;
}

// The complement direction Tf.grad^g(p) + p.Tr^g(S). Its negative is the
// L^2(vol g) adjoint of the constraint operator: <A_f h, p> = -<h, span_field(p)>.
inline TangentField span_field(const GeometryCache& c, const ScalarField& p) {
    TangentField out = pushforward(c, grad_g(c, p));
    for (std::size_t node = 0; node < c.grid.nodes(); ++node)
        for (int comp = 0; comp < c.n; ++comp)
            out.at(comp, node) += p[node] * c.mean_curv.at(comp, node);
    return out;
}

// ---- first-variation formulas (test oracles) ------------------------------

// Derivative of the volume density in direction h, returned as a density
// with respect to dtheta: Tr^g(gbar(grad h, Tf)) * sqrt|g|.
inline ScalarField dvol_variation(const GeometryCache& c, const TangentField& h) {
    std::vector<VecField> dh;
    for (int a = 0; a < c.d; ++a) dh.push_back(spectral::derivative(h, a, 1));
    ScalarField out(c.grid);
    for (std::size_t node = 0; node < c.grid.nodes(); ++node) {
        double tr = 0.0;
        for (int a = 0; a < c.d; ++a)
            for (int b = 0; b < c.d; ++b)
                tr += c.metric.ginv(node, a, b) * c.dot_target(dh[a], c.df[b], node);
        out[node] = tr * c.metric.sqrt_det(node);
    }
    return out;
}

// Derivative of the pullback metric in direction h: 2 Sym gbar(grad h, Tf),
// packed like the metric.
inline std::vector<ScalarField> dmetric_variation(const GeometryCache& c, const TangentField& h) {
    std::vector<VecField> dh;
    for (int a = 0; a < c.d; ++a) dh.push_back(spectral::derivative(h, a, 1));
    std::vector<ScalarField> out;
    for (int k = 0; k < c.metric.packed_count(); ++k) {
        const int a = k == 2 ? 1 : 0;
        const int b = k == 0 ? 0 : 1;
        ScalarField entry(c.grid);
        for (std::size_t node = 0; node < c.grid.nodes(); ++node)
            entry[node] = c.dot_target(dh[a], c.df[b], node) + c.dot_target(dh[b], c.df[a], node);
        out.push_back(std::move(entry));
    }
    return out;
}

} // namespace volimm
