#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "volimm/field.hpp"

namespace volimm::spectral {

using cplx = std::complex<double>;

// Number of stored modes of the real-to-complex transform. 1D grids store
// the half spectrum on their only axis, 2D grids keep axis 0 full-range and
// halve axis 1 (FFTW r2c layout).
inline std::size_t spec_size(const ParamGrid& g) {
    if (g.dim() == 1) return static_cast<std::size_t>(g.size(0) / 2 + 1);
    return static_cast<std::size_t>(g.size(0)) * (g.size(1) / 2 + 1);
}

namespace detail {

struct Plans {
    fftw_plan fwd = nullptr;
    fftw_plan bwd = nullptr;
};

// FFTW plan creation is not thread-safe; execution via the new-array
// interface is. Plans are created once per grid shape with FFTW_UNALIGNED
// so they can be executed on arbitrary caller buffers.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache c;
        return c;
    }

    Plans get(const ParamGrid& g) {
        const std::tuple<int, int, int> key{g.dim(), g.size(0), g.dim() == 2 ? g.size(1) : 0};
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;

        std::vector<double> real(g.nodes());
        std::vector<cplx> spec(spec_size(g));
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        Plans p;
        if (g.dim() == 1) {
            p.fwd = fftw_plan_dft_r2c_1d(g.size(0), real.data(),
                                         reinterpret_cast<fftw_complex*>(spec.data()), flags);
            p.bwd = fftw_plan_dft_c2r_1d(g.size(0),
                                         reinterpret_cast<fftw_complex*>(spec.data()),
                                         real.data(), flags);
        } else {
            p.fwd = fftw_plan_dft_r2c_2d(g.size(0), g.size(1), real.data(),
                                         reinterpret_cast<fftw_complex*>(spec.data()), flags);
            p.bwd = fftw_plan_dft_c2r_2d(g.size(0), g.size(1),
                                         reinterpret_cast<fftw_complex*>(spec.data()),
                                         real.data(), flags);
        }
        cache_[key] = p;
        return p;
    }

private:
    PlanCache() = default;
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, Plans> cache_;
};

} // namespace detail

// Unnormalized forward transform (FFTW sign convention, e^{-ikx}).
inline void forward(const ParamGrid& g, const double* in, cplx* out) {
    auto p = detail::PlanCache::instance().get(g);
    fftw_execute_dft_r2c(p.fwd, const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

// Inverse transform with 1/nodes normalization. The spectrum is copied
// internally because FFTW's multidimensional c2r destroys its input.
inline void inverse(const ParamGrid& g, const cplx* in, double* out) {
    std::vector<cplx> scratch(in, in + spec_size(g));
    auto p = detail::PlanCache::instance().get(g);
    fftw_execute_dft_c2r(p.bwd, reinterpret_cast<fftw_complex*>(scratch.data()), out);
    const double inv = 1.0 / static_cast<double>(g.nodes());
    for (std::size_t i = 0; i < g.nodes(); ++i) out[i] *= inv;
}

inline std::vector<cplx> forward(const ScalarField& f) {
    std::vector<cplx> spec(spec_size(f.grid()));
    forward(f.grid(), f.data(), spec.data());
    return spec;
}

inline ScalarField inverse(const ParamGrid& g, const std::vector<cplx>& spec) {
    ScalarField f(g);
    inverse(g, spec.data(), f.data());
    return f;
}

// Visit every stored mode with its integer frequencies. freq1 is signed
// (full axis for 2D; the half axis itself for 1D where it is reported in
// freq1 and freq2 == 0). nyq flags mark Nyquist frequencies of even axes.
template <typename F>
inline void for_each_mode(const ParamGrid& g, F&& visit) {
    if (g.dim() == 1) {
        const int n = g.size(0);
        for (int j = 0; j <= n / 2; ++j)
            visit(static_cast<std::size_t>(j), j, 0, j == n / 2, false);
    } else {
        const int n1 = g.size(0), n2 = g.size(1);
        const int m2 = n2 / 2 + 1;
        for (int i = 0; i < n1; ++i) {
            const int f1 = i <= n1 / 2 ? i : i - n1;
            for (int j = 0; j < m2; ++j)
                visit(static_cast<std::size_t>(i) * m2 + j, f1, j,
                      i == n1 / 2, j == n2 / 2);
        }
    }
}

// d^order/dtheta_axis^order by Fourier multiplier (i k)^order; the Nyquist
// mode is dropped for odd orders to keep the result real-symmetric valid.
inline ScalarField derivative(const ScalarField& f, int axis, int order = 1) {
    const ParamGrid& g = f.grid();
    std::vector<cplx> spec = forward(f);
    const double scale1 = 2.0 * std::numbers::pi / g.period(0);
    const double scale2 = g.dim() == 2 ? 2.0 * std::numbers::pi / g.period(1) : 0.0;
    for_each_mode(g, [&](std::size_t idx, int f1, int f2, bool nyq1, bool nyq2) {
        const double k = axis == 0 ? f1 * scale1 : f2 * scale2;
        const bool nyq = axis == 0 ? nyq1 : nyq2;
        cplx m = std::pow(cplx(0.0, k), order);
        if (nyq && order % 2 != 0) m = 0.0;
        spec[idx] *= m;
    });
    return inverse(g, spec);
}

// Componentwise spectral derivative of a vector-valued field.
inline VecField derivative(const VecField& f, int axis, int order = 1) {
    VecField out(f.grid(), f.comps());
    ScalarField tmp(f.grid());
    for (int c = 0; c < f.comps(); ++c) {
        std::copy(f.comp(c).begin(), f.comp(c).end(), tmp.begin());
        ScalarField d = derivative(tmp, axis, order);
        std::copy(d.begin(), d.end(), out.comp(c).begin());
    }
    return out;
}

// Apply a real Fourier multiplier m(k1, k2) given scaled wavenumbers
// (radians per unit parameter). Keeps the field real.
template <typename M>
inline ScalarField apply_multiplier(const ScalarField& f, M&& mult) {
    const ParamGrid& g = f.grid();
    std::vector<cplx> spec = forward(f);
    const double scale1 = 2.0 * std::numbers::pi / g.period(0);
    const double scale2 = g.dim() == 2 ? 2.0 * std::numbers::pi / g.period(1) : 0.0;
    for_each_mode(g, [&](std::size_t idx, int f1, int f2, bool, bool) {
        spec[idx] *= mult(f1 * scale1, f2 * scale2);
    });
    return inverse(g, spec);
}

// Zero all modes with an integer frequency above size/3 on either axis
// (the 2/3 rule for quadratic nonlinearities).
inline void dealias_two_thirds(const ParamGrid& g, std::vector<cplx>& spec) {
    const int c1 = g.size(0) / 3;
    const int c2 = g.dim() == 2 ? g.size(1) / 3 : 0;
    for_each_mode(g, [&](std::size_t idx, int f1, int f2, bool, bool) {
        if (std::abs(f1) > c1 || (g.dim() == 2 && f2 > c2)) spec[idx] = 0.0;
    });
}

// Inverse transform onto a `factor`-times finer grid by zero padding.
// Intended for band-limited data (e.g. after the 2/3 rule); Nyquist modes
// of the coarse grid are dropped.
inline std::vector<double> inverse_padded(const ParamGrid& g, const std::vector<cplx>& spec,
                                          int factor, ParamGrid* fine_out = nullptr) {
    if (g.dim() == 1) {
        const ParamGrid fine(g.size(0) * factor, g.period(0));
        std::vector<cplx> big(spec_size(fine), 0.0);
        for (int j = 0; j < g.size(0) / 2; ++j) big[j] = spec[j];
        std::vector<double> out(fine.nodes());
        inverse(fine, big.data(), out.data());
        const double s = static_cast<double>(fine.nodes()) / g.nodes();
        for (double& t : out) t *= s;
        if (fine_out) *fine_out = fine;
        return out;
    }
    const ParamGrid fine(g.size(0) * factor, g.size(1) * factor, g.period(0), g.period(1));
    const int n1 = g.size(0), n2 = g.size(1);
    const int m2 = n2 / 2 + 1;
    const int M2 = fine.size(1) / 2 + 1;
    std::vector<cplx> big(spec_size(fine), 0.0);
    for (int i = 0; i < n1; ++i) {
        if (i == n1 / 2) continue;
        const int f1 = i <= n1 / 2 ? i : i - n1;
        const int I = f1 >= 0 ? f1 : f1 + fine.size(0);
        for (int j = 0; j < n2 / 2; ++j)
            big[static_cast<std::size_t>(I) * M2 + j] = spec[static_cast<std::size_t>(i) * m2 + j];
    }
    std::vector<double> out(fine.nodes());
    inverse(fine, big.data(), out.data());
    const double s = static_cast<double>(fine.nodes()) / g.nodes();
    for (double& t : out) t *= s;
    if (fine_out) *fine_out = fine;
    return out;
}

} // namespace volimm::spectral
