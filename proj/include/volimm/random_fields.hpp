#pragma once

#include <cstdint>
#include <random>

#include "volimm/fft.hpp"

namespace volimm {

// Seeded band-limited random fields. Gaussian white noise in physical space
// is low-passed with exp(-|k|^2/k0^2) on the integer wavenumbers, then
// rescaled to the requested sup norm. Deterministic for a fixed seed.
inline ScalarField random_smooth_scalar(const ParamGrid& g, std::uint64_t seed,
                                        double k0 = 4.0, double amplitude = 1.0) {
    std::mt19937_64 rng(seed);
    auto uniform = [&rng]() {
        return static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };
    ScalarField f(g);
    for (std::size_t i = 0; i < f.size(); ++i) {
        // Box-Muller; both draws consumed to keep the stream aligned
        const double u1 = std::max(uniform(), 1e-18);
        const double u2 = uniform();
        f[i] = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }
    auto spec = spectral::forward(f);
    spectral::for_each_mode(g, [&](std::size_t idx, int f1, int f2, bool, bool) {
        const double ksq = static_cast<double>(f1) * f1 + static_cast<double>(f2) * f2;
        spec[idx] *= std::exp(-ksq / (k0 * k0));
    });
    ScalarField out = spectral::inverse(g, spec);
    const double m = linf_norm(out);
    if (m > 0.0) scale(out, amplitude / m);
    return out;
}

inline VecField random_smooth_vec(const ParamGrid& g, int comps, std::uint64_t seed,
                                  double k0 = 4.0, double amplitude = 1.0) {
    VecField out(g, comps);
    for (int c = 0; c < comps; ++c) {
        ScalarField s = random_smooth_scalar(g, seed * 1000003ULL + c, k0, amplitude);
        std::copy(s.begin(), s.end(), out.comp(c).begin());
    }
    return out;
}

} // namespace volimm
