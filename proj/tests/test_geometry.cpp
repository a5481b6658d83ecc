#include <catch2/catch_amalgamated.hpp>

#include "volimm/geometry.hpp"
#include "volimm/random_fields.hpp"

using namespace volimm;

namespace {

GeometryCache circle_cache(int n) {
    static std::map<int, std::pair<DiscreteImmersion, BackgroundDensity>> store;
    auto it = store.find(n);
    if (it == store.end()) {
        DiscreteImmersion f = make_circle(n);
        BackgroundDensity mu = BackgroundDensity::from_immersion(f);
        it = store.emplace(n, std::make_pair(std::move(f), std::move(mu))).first;
    }
    return build_geometry(it->second.first, it->second.second);
}

double fd_slope(const std::vector<double>& eps, const std::vector<double>& errs) {
    // least-squares slope of log(err) vs log(eps)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(eps.size());
    for (int i = 0; i < n; ++i) {
        const double x = std::log(eps[i]), y = std::log(errs[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

TEST_CASE("unit circle mean curvature is the inward radial field") {
    const int n = 64;
    DiscreteImmersion f = make_circle(n);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
    double err = 0.0;
    for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
        const double th = c.grid.coord(0, i);
        err = std::max(err, std::abs(c.mean_curv.at(0, i) + std::cos(th)));
        err = std::max(err, std::abs(c.mean_curv.at(1, i) + std::sin(th)));
    }
    REQUIRE(err <= 1e-10);
    REQUIRE(linf_norm(c.rho) == Catch::Approx(1.0).margin(1e-13));
}

TEST_CASE("torus of revolution matches the closed-form principal curvature sum") {
    const double R = 2.0, r = 1.0;
    DiscreteImmersion f = make_torus_of_revolution(64, 64, R, r);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
    double err = 0.0;
    for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
        const double u = c.grid.coord(0, i);
        const double v = c.grid.coord(1, i);
        // outward unit normal of the tube and kappa_1 + kappa_2; Tr S points
        // along the inward normal
        const double nx = std::cos(v) * std::cos(u);
        const double ny = std::cos(v) * std::sin(u);
        const double nz = std::sin(v);
        const double ksum = std::cos(v) / (R + r * std::cos(v)) + 1.0 / r;
        err = std::max(err, std::abs(c.mean_curv.at(0, i) + ksum * nx));
        err = std::max(err, std::abs(c.mean_curv.at(1, i) + ksum * ny));
        err = std::max(err, std::abs(c.mean_curv.at(2, i) + ksum * nz));
    }
    REQUIRE(err <= 1e-9);
}

TEST_CASE("second fundamental form agrees with the Christoffel-corrected route") {
    DiscreteImmersion f = make_torus_of_revolution(32, 32);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));

    // Gamma^e_{ab} from spectral derivatives of the metric entries
    std::vector<std::vector<ScalarField>> dg;  // dg[axis][packed]
    for (int ax = 0; ax < 2; ++ax) {
        std::vector<ScalarField> row;
        for (int k = 0; k < 3; ++k) {
            ScalarField entry(c.grid);
            const auto& src = c.metric.g_packed(k);
            std::copy(src.begin(), src.end(), entry.begin());
            row.push_back(spectral::derivative(entry, ax, 1));
        }
        dg.push_back(std::move(row));
    }
    auto dgab = [&](int ax, int a, int b) { return dg[ax][MetricField::pack(a, b)]; };

    double err = 0.0;
    for (int a = 0; a < 2; ++a)
        for (int b = a; b < 2; ++b) {
            VecField d2 = f.second_partial(a, b);
            for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
                double gamma[2];
                for (int e = 0; e < 2; ++e) {
                    gamma[e] = 0.0;
                    for (int d = 0; d < 2; ++d)
                        gamma[e] += 0.5 * c.metric.ginv(i, e, d) *
                                    (dgab(a, b, d)[i] + dgab(b, a, d)[i] - dgab(d, a, b)[i]);
                }
                for (int comp = 0; comp < 3; ++comp) {
                    double s = d2.at(comp, i);
                    for (int e = 0; e < 2; ++e) s -= gamma[e] * c.df[e].at(comp, i);
                    err = std::max(err, std::abs(
                        s - c.second_fund[MetricField::pack(a, b)].at(comp, i)));
                }
            }
        }
    REQUIRE(err <= 1e-8);
}

TEST_CASE("flat torus identity is totally geodesic with unit density") {
    DiscreteImmersion f = make_torus_identity(32, 32);
    GeometryCache c = build_geometry(f, BackgroundDensity::uniform(f.grid()));
    for (const auto& s : c.second_fund) REQUIRE(linf_norm(s) <= 1e-14);
    REQUIRE(linf_norm(c.mean_curv) <= 1e-14);
    double dev = 0.0;
    for (double t : c.rho) dev = std::max(dev, std::abs(t - 1.0));
    REQUIRE(dev <= 1e-14);
    REQUIRE(c.is_minimal());
}

TEST_CASE("rank-deficient immersions are rejected with the worst node") {
    ParamGrid grid(16);
    VecField pts(grid, 2);  // constant map, Tf == 0 everywhere
    for (std::size_t i = 0; i < grid.nodes(); ++i) {
        pts.at(0, i) = 1.0;
        pts.at(1, i) = 2.0;
    }
    DiscreteImmersion f = DiscreteImmersion::euclidean(grid, std::move(pts));
    REQUIRE_THROWS_AS(build_geometry(f, BackgroundDensity::uniform(grid)),
                      RankDeficientError);
}

TEST_CASE("tangential/normal split on the circle") {
    GeometryCache c = circle_cache(64);
    TangentField radial(c.grid, 2), tangent(c.grid, 2);
    for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
        const double th = c.grid.coord(0, i);
        radial.at(0, i) = std::cos(th);
        radial.at(1, i) = std::sin(th);
        tangent.at(0, i) = -std::sin(th);
        tangent.at(1, i) = std::cos(th);
    }
    TangentSplit sr = split_tangent(c, radial);
    REQUIRE(linf_norm(sr.top) <= 1e-12);
    REQUIRE(linf_norm(lin_comb(1.0, sr.perp, -1.0, radial)) <= 1e-12);

    TangentSplit st = split_tangent(c, tangent);
    REQUIRE(linf_norm(st.perp) <= 1e-12);
    for (std::size_t i = 0; i < c.grid.nodes(); ++i)
        REQUIRE(st.top.at(0, i) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("split reassembles and is orthogonal on random fields") {
    DiscreteImmersion f = make_torus_of_revolution(32, 32);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        TangentField h = random_smooth_vec(c.grid, 3, seed);
        TangentSplit s = split_tangent(c, h);
        TangentField back = pushforward(c, s.top);
        axpy(1.0, s.perp, back);
        REQUIRE(linf_norm(lin_comb(1.0, back, -1.0, h)) <= 1e-12 * std::max(1.0, linf_norm(h)));
        double ortho = 0.0;
        for (std::size_t i = 0; i < c.grid.nodes(); ++i)
            for (int a = 0; a < c.d; ++a)
                ortho = std::max(ortho, std::abs(c.dot_target(s.perp, c.df[a], i)));
        REQUIRE(ortho <= 1e-10);
    }
}

TEST_CASE("mean curvature is normal on smooth immersions") {
    DiscreteImmersion f = make_perturbed_circle(64);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
    double ortho = 0.0;
    for (std::size_t i = 0; i < c.grid.nodes(); ++i)
        ortho = std::max(ortho, std::abs(c.dot_target(c.mean_curv, c.df[0], i)));
    REQUIRE(ortho <= 1e-8);
}

TEST_CASE("intrinsic calculus on the circle") {
    GeometryCache c = circle_cache(64);

    ScalarField constant(c.grid, 3.5);
    REQUIRE(linf_norm(grad_g(c, constant)) <= 1e-12);
    REQUIRE(linf_norm(laplace_beltrami(c, constant)) <= 1e-12);

    ScalarField p(c.grid);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::cos(c.grid.coord(0, i));
    ScalarField lap = laplace_beltrami(c, p);
    double err = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) err = std::max(err, std::abs(lap[i] + p[i]));
    REQUIRE(err <= 1e-10);
}

TEST_CASE("divergence theorem and grad/div adjointness") {
    DiscreteImmersion f = make_torus_of_revolution(32, 32);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));

    IntrinsicField x(c.grid, 2);
    {
        VecField r = random_smooth_vec(c.grid, 2, 42);
        x = r;
    }
    REQUIRE(std::abs(integral_vol(c, div_g(c, x))) <= 1e-10);

    ScalarField p = random_smooth_scalar(c.grid, 43);
    const double lhs = inner_l2_metric(c, grad_g(c, p), x);
    const double rhs = -inner_l2_vol(c, p, div_g(c, x));
    REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-10).margin(1e-12));
}

TEST_CASE("constraint residual closed forms on the circle") {
    GeometryCache c = circle_cache(64);
    TangentField radial(c.grid, 2), tangent(c.grid, 2);
    for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
        const double th = c.grid.coord(0, i);
        radial.at(0, i) = std::cos(th);
        radial.at(1, i) = std::sin(th);
        tangent.at(0, i) = -std::sin(th);
        tangent.at(1, i) = std::cos(th);
    }
    REQUIRE(linf_norm(constraint_residual(c, tangent)) <= 1e-10);
    ScalarField res = constraint_residual(c, radial);
    for (std::size_t i = 0; i < res.size(); ++i)
        REQUIRE(res[i] == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("divergence-free fields on the flat torus satisfy the constraint") {
    DiscreteImmersion f = make_torus_identity(32, 32);
    GeometryCache c = build_geometry(f, BackgroundDensity::uniform(f.grid()));
    // h = rot grad phi = (-phi_y, phi_x): divergence-free by construction
    ScalarField phi = random_smooth_scalar(c.grid, 11);
    TangentField h(c.grid, 2);
    ScalarField hy = spectral::derivative(phi, 1, 1);
    ScalarField hx = spectral::derivative(phi, 0, 1);
    for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
        h.at(0, i) = -hy[i];
        h.at(1, i) = hx[i];
    }
    REQUIRE(linf_norm(constraint_residual(c, h)) <= 1e-10);
}

TEST_CASE("volume variation closed forms on the circle") {
    GeometryCache c = circle_cache(64);
    TangentField radial(c.grid, 2), tangent(c.grid, 2);
    for (std::size_t i = 0; i < c.grid.nodes(); ++i) {
        const double th = c.grid.coord(0, i);
        radial.at(0, i) = std::cos(th);
        radial.at(1, i) = std::sin(th);
        tangent.at(0, i) = -std::sin(th);
        tangent.at(1, i) = std::cos(th);
    }
    // scaling grows length at unit rate: dvol = vol(g) (density sqrt(g) == 1)
    ScalarField dv = dvol_variation(c, radial);
    for (std::size_t i = 0; i < dv.size(); ++i)
        REQUIRE(dv[i] == Catch::Approx(c.metric.sqrt_det(i)).margin(1e-10));
    // constraint-satisfying directions do not change the volume
    REQUIRE(linf_norm(dvol_variation(c, tangent)) <= 1e-10);
}

TEST_CASE("dvol agrees with the constraint form A(h) sqrt(g)") {
    DiscreteImmersion f = make_perturbed_circle(64);
    GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
    TangentField h = random_smooth_vec(c.grid, 2, 77);
    ScalarField dv = dvol_variation(c, h);
    ScalarField a = constraint_residual(c, h);
    double err = 0.0;
    for (std::size_t i = 0; i < dv.size(); ++i)
        err = std::max(err, std::abs(dv[i] - a[i] * c.metric.sqrt_det(i)));
    REQUIRE(err <= 1e-9);
}

TEST_CASE("finite differences of vol and g converge to the variation formulas") {
    DiscreteImmersion f = make_perturbed_circle(32, 0.1, 3);
    BackgroundDensity unit = BackgroundDensity::uniform(f.grid());
    GeometryCache c = build_geometry(f, unit);
    TangentField h = random_smooth_vec(c.grid, 2, 5);

    const std::vector<double> eps{1e-3, 1e-4, 1e-5, 1e-6};
    std::vector<double> errs_vol, errs_met;
    ScalarField dv = dvol_variation(c, h);
    std::vector<ScalarField> dm = dmetric_variation(c, h);
    for (double e : eps) {
        DiscreteImmersion fe = f.displaced(h, e);
        ScalarField vol_e = rho_of(fe, unit);   // sqrt|g| with unit weight
        double err = 0.0;
        for (std::size_t i = 0; i < vol_e.size(); ++i)
            err = std::max(err, std::abs((vol_e[i] - c.metric.sqrt_det(i)) / e - dv[i]));
        errs_vol.push_back(err);

        GeometryCache ce = build_geometry(fe, unit);
        double err_m = 0.0;
        for (int k = 0; k < c.metric.packed_count(); ++k)
            for (std::size_t i = 0; i < vol_e.size(); ++i)
                err_m = std::max(err_m, std::abs(
                    (ce.metric.g_packed(k)[i] - c.metric.g_packed(k)[i]) / e - dm[k][i]));
        errs_met.push_back(err_m);
    }
    REQUIRE(fd_slope(eps, errs_vol) == Catch::Approx(1.0).margin(0.1));
    REQUIRE(fd_slope(eps, errs_met) == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("grid validation") {
    REQUIRE_THROWS_AS(ParamGrid(7), RangeError);
    REQUIRE_THROWS_AS(ParamGrid(9), RangeError);
    REQUIRE_THROWS_AS(ParamGrid(16, -1.0), RangeError);
    REQUIRE_NOTHROW(ParamGrid(8));
}
