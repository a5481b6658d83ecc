#include <catch2/catch_amalgamated.hpp>

#include "volimm/euler.hpp"
#include "volimm/initial_conditions.hpp"

using namespace volimm;

namespace {

ParamGrid torus(int n) { return ParamGrid(n, n); }

VelocityField2D random_velocity(const ParamGrid& g, std::uint64_t seed) {
    return {random_smooth_scalar(g, seed, 3.0), random_smooth_scalar(g, seed + 1, 3.0)};
}

} // namespace

TEST_CASE("Leray projection annihilates gradients and fixes solenoidal fields") {
    ParamGrid g = torus(64);
    ScalarField phi(g);
    for (std::size_t i = 0; i < g.nodes(); ++i)
        phi[i] = std::sin(g.coord(0, i)) * std::cos(g.coord(1, i));
    VelocityField2D grad{spectral::derivative(phi, 0, 1), spectral::derivative(phi, 1, 1)};
    // add a mean flow, which is harmonic and must survive
    for (double& t : grad.u) t += 0.3;
    VelocityField2D proj = leray_project(grad);
    double dev = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        dev = std::max(dev, std::abs(proj.u[i] - 0.3));
        dev = std::max(dev, std::abs(proj.v[i]));
    }
    REQUIRE(dev <= 1e-13);

    VorticityField w(make_random_vorticity(g, 5));
    VelocityField2D solenoidal = velocity_of(w);
    VelocityField2D again = leray_project(solenoidal);
    double change = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        change = std::max(change, std::abs(again.u[i] - solenoidal.u[i]));
        change = std::max(change, std::abs(again.v[i] - solenoidal.v[i]));
    }
    REQUIRE(change <= 1e-13);
}

TEST_CASE("Leray projection: divergence and idempotency on random fields") {
    ParamGrid g = torus(64);
    for (std::uint64_t seed : {11u, 12u}) {
        VelocityField2D u = random_velocity(g, seed);
        VelocityField2D p1 = leray_project(u);
        REQUIRE(linf_norm(divergence(p1)) <= 1e-12);
        VelocityField2D p2 = leray_project(p1);
        double dev = 0.0;
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            dev = std::max(dev, std::abs(p2.u[i] - p1.u[i]));
            dev = std::max(dev, std::abs(p2.v[i] - p1.v[i]));
        }
        REQUIRE(dev <= 1e-13);
    }
}

TEST_CASE("parallel shear flows are steady states of the vorticity solver") {
    ParamGrid g = torus(64);
    VorticityField w(make_shear_vorticity(g));
    VorticityField cur = w;
    for (int i = 0; i < 50; ++i) cur = step_euler_vorticity(cur, 1e-3);
    REQUIRE(linf_norm(lin_comb(1.0, cur.omega, -1.0, w.omega)) <= 1e-10);
}

TEST_CASE("constant vorticity with a mean flow is stationary") {
    ParamGrid g = torus(32);
    VorticityField w(ScalarField(g, 0.7), 0.25, -0.1);
    VelocityField2D vel = velocity_of(w);
    double dev = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        dev = std::max(dev, std::abs(vel.u[i] - 0.25));
        dev = std::max(dev, std::abs(vel.v[i] + 0.1));
    }
    REQUIRE(dev <= 1e-13);
    VorticityField next = step_euler_vorticity(w, 1e-2);
    REQUIRE(linf_norm(lin_comb(1.0, next.omega, -1.0, w.omega)) <= 1e-13);
}

TEST_CASE("energy, enstrophy and mean vorticity are conserved") {
    ParamGrid g = torus(64);
    VorticityField w(make_random_vorticity(g, 21));
    const double e0 = kinetic_energy(velocity_of(w));
    const double z0 = enstrophy(w);
    VorticityField cur = w;
    for (int i = 0; i < 100; ++i) cur = step_euler_vorticity(cur, 2e-3);
    REQUIRE(std::abs(kinetic_energy(velocity_of(cur)) - e0) / e0 <= 1e-8);
    REQUIRE(std::abs(enstrophy(cur) - z0) / z0 <= 1e-7);
    REQUIRE(std::abs(VorticityField::mean_of(cur.omega) - w.initial_mean) <= 1e-12);
}

TEST_CASE("CFL violations and tiny grids are rejected") {
    ParamGrid g = torus(64);
    VorticityField w(make_shear_vorticity(g));
    REQUIRE_THROWS_AS(step_euler_vorticity(w, 0.2), CflError);
    ParamGrid small(16, 16);
    VorticityField ws(make_shear_vorticity(small));
    REQUIRE_THROWS_AS(step_euler_vorticity(ws, 1e-3), RangeError);
}

TEST_CASE("flow map transport: rest and rigid translation") {
    ParamGrid g = torus(32);
    DiscreteImmersion id = make_torus_identity(32, 32);

    VelocityField2D zero{ScalarField(g), ScalarField(g)};
    VelocitySampler zs(zero);
    auto at_rest = [&](double) -> const VelocitySampler& { return zs; };
    DiscreteImmersion still = advect_flowmap(id, at_rest, 0.0, 1e-2);
    REQUIRE(linf_norm(lin_comb(1.0, still.displacement(), -1.0, id.displacement())) <= 1e-14);

    VelocityField2D uniform{ScalarField(g, 0.4), ScalarField(g, -0.2)};
    VelocitySampler us(uniform);
    auto at_uniform = [&](double) -> const VelocitySampler& { return us; };
    DiscreteImmersion moved = id;
    for (int i = 0; i < 10; ++i) moved = advect_flowmap(moved, at_uniform, 0.0, 1e-2);
    double dev = 0.0;
    for (std::size_t i = 0; i < g.nodes(); ++i) {
        dev = std::max(dev, std::abs(moved.displacement().at(0, i) - 0.04));
        dev = std::max(dev, std::abs(moved.displacement().at(1, i) + 0.02));
    }
    REQUIRE(dev <= 1e-12);
}

TEST_CASE("flow map along the shear preserves volume") {
    const int n = 64;
    DiscreteImmersion f = make_torus_identity(n, n);
    BackgroundDensity mu = BackgroundDensity::uniform(f.grid());
    VorticityField w(make_shear_vorticity(f.grid()));
    VelocitySampler sampler(velocity_of(w));   // stationary flow
    auto at = [&](double) -> const VelocitySampler& { return sampler; };
    const double dt = 1e-3;
    for (int i = 0; i < 50; ++i) f = advect_flowmap(f, at, i * dt, dt);
    ScalarField rho = rho_of(f, mu);
    for (double& t : rho) t -= 1.0;
    REQUIRE(linf_norm(rho) <= 1e-8);
}

TEST_CASE("general projection at the identity equals the Leray projection") {
    ParamGrid g = torus(64);

    // pure gradient: both remove everything
    ScalarField phi = random_smooth_scalar(g, 31, 3.0);
    TangentField grad_phi(g, 2);
    {
        ScalarField px = spectral::derivative(phi, 0, 1);
        ScalarField py = spectral::derivative(phi, 1, 1);
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            grad_phi.at(0, i) = px[i];
            grad_phi.at(1, i) = py[i];
        }
    }
    LerayCrosscheck gc = crosscheck_general_projection(grad_phi);
    REQUIRE(gc.sup_hmu_diff <= 1e-9);

    // divergence-free: both keep everything
    VorticityField w(make_random_vorticity(g, 32));
    VelocityField2D sol = velocity_of(w);
    TangentField hsol(g, 2);
    std::copy(sol.u.begin(), sol.u.end(), hsol.comp(0).begin());
    std::copy(sol.v.begin(), sol.v.end(), hsol.comp(1).begin());
    LerayCrosscheck sc = crosscheck_general_projection(hsol);
    REQUIRE(sc.sup_hmu_diff <= 1e-9);
    REQUIRE(sc.sup_p_diff <= 1e-9);

    // generic field
    TangentField h = random_smooth_vec(g, 2, 33, 3.0);
    LerayCrosscheck rc = crosscheck_general_projection(h);
    REQUIRE(rc.sup_hmu_diff <= 1e-9);
    REQUIRE(rc.sup_p_diff <= 1e-9);
}
