#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <span>
#include <vector>

#include "volimm/grid.hpp"

namespace volimm {

// Real-valued function sampled on the grid nodes.
class ScalarField {
public:
    explicit ScalarField(const ParamGrid& grid, double fill = 0.0)
        : grid_(grid), v_(grid.nodes(), fill) {}

    const ParamGrid& grid() const { return grid_; }
    std::size_t size() const { return v_.size(); }

    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    auto begin() { return v_.begin(); }
    auto end() { return v_.end(); }
    auto begin() const { return v_.begin(); }
    auto end() const { return v_.end(); }

private:
    ParamGrid grid_;
    std::vector<double> v_;
};

// Vector-valued field: `comps` real components per node, stored
// component-major so each component plane is contiguous (FFT-friendly).
// Used both for fields along the immersion (comps = target dimension)
// and for intrinsic vector fields on M (comps = grid dimension).
class VecField {
public:
    VecField(const ParamGrid& grid, int comps, double fill = 0.0)
        : grid_(grid), comps_(comps),
          v_(grid.nodes() * static_cast<std::size_t>(comps), fill) {
        assert(comps >= 1);
    }

    const ParamGrid& grid() const { return grid_; }
    int comps() const { return comps_; }
    std::size_t nodes() const { return grid_.nodes(); }

    std::span<double> comp(int c) { return {v_.data() + c * static_cast<std::ptrdiff_t>(nodes()), nodes()}; }
    std::span<const double> comp(int c) const { return {v_.data() + c * static_cast<std::ptrdiff_t>(nodes()), nodes()}; }

    double& at(int c, std::size_t node) { return v_[static_cast<std::size_t>(c) * nodes() + node]; }
    double at(int c, std::size_t node) const { return v_[static_cast<std::size_t>(c) * nodes() + node]; }

    std::vector<double>& raw() { return v_; }
    const std::vector<double>& raw() const { return v_; }

private:
    ParamGrid grid_;
    int comps_;
    std::vector<double> v_;
};

// A field along an immersion (section of f^*TN); same layout as VecField.
using TangentField = VecField;
// An intrinsic vector field on the parameter manifold (comps = grid dim).
using IntrinsicField = VecField;

// ---- small vector-space helpers -----------------------------------------

inline void axpy(double a, const ScalarField& x, ScalarField& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}
inline void axpy(double a, const VecField& x, VecField& y) {
    auto& yr = y.raw();
    const auto& xr = x.raw();
    for (std::size_t i = 0; i < yr.size(); ++i) yr[i] += a * xr[i];
}
inline void scale(ScalarField& x, double a) { for (auto& t : x) t *= a; }
inline void scale(VecField& x, double a) { for (auto& t : x.raw()) t *= a; }

inline ScalarField lin_comb(double a, const ScalarField& x, double b, const ScalarField& y) {
    ScalarField r(x.grid());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a * x[i] + b * y[i];
    return r;
}
inline VecField lin_comb(double a, const VecField& x, double b, const VecField& y) {
    VecField r(x.grid(), x.comps());
    for (std::size_t i = 0; i < r.raw().size(); ++i) r.raw()[i] = a * x.raw()[i] + b * y.raw()[i];
    return r;
}

inline double linf_norm(const ScalarField& x) {
    double m = 0.0;
    for (double t : x) m = std::max(m, std::abs(t));
    return m;
}
inline double linf_norm(const VecField& x) {
    double m = 0.0;
    for (double t : x.raw()) m = std::max(m, std::abs(t));
    return m;
}

// Plain (unweighted) dot products; metric-weighted versions live with the
// geometry cache.
inline double dot_plain(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}
inline double dot_plain(const VecField& a, const VecField& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.raw().size(); ++i) s += a.raw()[i] * b.raw()[i];
    return s;
}

inline bool all_finite(const ScalarField& x) {
    return std::all_of(x.begin(), x.end(), [](double t) { return std::isfinite(t); });
}
inline bool all_finite(const VecField& x) {
    return std::all_of(x.raw().begin(), x.raw().end(), [](double t) { return std::isfinite(t); });
}

} // namespace volimm
