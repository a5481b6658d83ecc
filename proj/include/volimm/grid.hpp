#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "volimm/errors.hpp"

namespace volimm {

// Uniform periodic sampling grid on S^1 (dim 1) or T^2 (dim 2).
// Node (i,j) sits at theta = (i*P1/N1, j*P2/N2); storage is row-major,
// index = i*N2 + j. Sizes must be even and >= 8 so that spectral
// differentiation has a well-defined Nyquist mode and enough resolution.
class ParamGrid {
public:
    ParamGrid(int n1, double period1 = 2.0 * std::numbers::pi)
        : dim_(1), sizes_{n1, 1}, periods_{period1, 0.0} {
        validate_size(n1);
        if (!(period1 > 0.0)) throw RangeError("grid period must be positive");
    }

    ParamGrid(int n1, int n2,
              double period1 = 2.0 * std::numbers::pi,
              double period2 = 2.0 * std::numbers::pi)
        : dim_(2), sizes_{n1, n2}, periods_{period1, period2} {
        validate_size(n1);
        validate_size(n2);
        if (!(period1 > 0.0) || !(period2 > 0.0))
            throw RangeError("grid periods must be positive");
    }

    int dim() const { return dim_; }
    int size(int axis) const { return sizes_[axis]; }
    double period(int axis) const { return periods_[axis]; }
    double spacing(int axis) const { return periods_[axis] / sizes_[axis]; }

    std::size_t nodes() const {
        return static_cast<std::size_t>(sizes_[0]) * (dim_ == 2 ? sizes_[1] : 1);
    }

    // Parameter-space measure of one cell (dtheta, or dtheta1*dtheta2).
    double cell_measure() const {
        double m = spacing(0);
        if (dim_ == 2) m *= spacing(1);
        return m;
    }

    std::size_t index(int i, int j = 0) const {
        return static_cast<std::size_t>(i) * (dim_ == 2 ? sizes_[1] : 1) + j;
    }

    double coord(int axis, std::size_t node) const {
        const int n2 = dim_ == 2 ? sizes_[1] : 1;
        const int i = static_cast<int>(node) / n2;
        const int j = static_cast<int>(node) % n2;
        return (axis == 0 ? i : j) * spacing(axis);
    }

    bool operator==(const ParamGrid& o) const {
        return dim_ == o.dim_ && sizes_ == o.sizes_ && periods_ == o.periods_;
    }
    bool operator!=(const ParamGrid& o) const { return !(*this == o); }

private:
    static void validate_size(int n) {
        if (n < 8 || n % 2 != 0)
            throw RangeError("grid sizes must be even and >= 8, got " + std::to_string(n));
    }

    int dim_;
    std::array<int, 2> sizes_;
    std::array<double, 2> periods_;
};

} // namespace volimm
