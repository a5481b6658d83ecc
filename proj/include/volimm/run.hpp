#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include "volimm/dense_oracle.hpp"
#include "volimm/euler.hpp"
#include "volimm/initial_conditions.hpp"
#include "volimm/scenario.hpp"

namespace volimm {

namespace io {

// Locale-independent shortest round-trip formatting; every number written
// to disk goes through here so reruns are byte-identical.
inline std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string fmt(std::int64_t v) { return std::to_string(v); }
inline std::string fmt(const std::string& v) { return v; }
inline std::string fmt(const char* v) { return v; }

class TsvWriter {
public:
    explicit TsvWriter(const std::filesystem::path& p) : out_(p, std::ios::binary) {
        if (!out_) throw Error("cannot open " + p.string() + " for writing");
    }
    void comment(const std::string& line) { out_ << "# " << line << "\n"; }
    template <typename... Ts>
    void row(Ts... vals) {
        bool first = true;
        ((out_ << (first ? "" : "\t") << fmt(vals), first = false), ...);
        out_ << "\n";
    }
private:
    std::ofstream out_;
};

} // namespace io

struct RunRecord {
    std::string format_tag = "volimm.run/1";
    Scenario scenario;
    std::map<std::string, double> summary;
    bool failed = false;
    std::string failure;
};

namespace run_detail {

using nlohmann::json;
namespace fs = std::filesystem;

inline void write_run_record(const fs::path& dir, const RunRecord& rec) {
    json j;
    j["format"] = rec.format_tag;
    j["scenario"] = json::parse(print_scenario(rec.scenario));
    for (const auto& [k, v] : rec.summary) j["summary"][k] = v;
    j["failed"] = rec.failed;
    j["failure"] = rec.failure;
    std::ofstream out(dir / "run.json", std::ios::binary);
    out << j.dump(2) << "\n";
}

inline GeodesicState build_initial_state(const Scenario& sc) {
    const InitialSpec& in = sc.initial;
    if (in.family == "circle_rotation") return make_circle_rotation(sc.n1, in.omega);
    if (in.family == "circle_bump")
        return make_whip(sc.n1, in.amplitude, in.width, in.center);
    if (in.family == "torus_rev_bump")
        return make_surface_bump(sc.n1, sc.n2 ? sc.n2 : sc.n1, in.big_radius,
                                 in.small_radius, in.amplitude, in.width);
    throw SchemaError("initial/family",
                      "family '" + in.family + "' does not fit an immersion case");
}

inline void write_curve_snapshot(const fs::path& file, const GeodesicState& st) {
    io::TsvWriter w(file);
    w.comment("theta\tx\ty\tvx\tvy");
    const ParamGrid& g = st.f.grid();
    VecField pts = st.f.points();
    for (std::size_t i = 0; i < g.nodes(); ++i)
        w.row(g.coord(0, i), pts.at(0, i), pts.at(1, i),
              st.velocity.at(0, i), st.velocity.at(1, i));
}

inline void write_surface_snapshot(const fs::path& file, const GeodesicState& st) {
    io::TsvWriter w(file);
    w.comment("theta1\ttheta2\tx\ty\tz\tvx\tvy\tvz");
    const ParamGrid& g = st.f.grid();
    VecField pts = st.f.points();
    for (std::size_t i = 0; i < g.nodes(); ++i)
        w.row(g.coord(0, i), g.coord(1, i), pts.at(0, i), pts.at(1, i), pts.at(2, i),
              st.velocity.at(0, i), st.velocity.at(1, i), st.velocity.at(2, i));
}

inline void write_matrix(const fs::path& file, const ScalarField& f) {
    std::ofstream out(file, std::ios::binary);
    const ParamGrid& g = f.grid();
    for (int i = 0; i < g.size(0); ++i) {
        for (int j = 0; j < g.size(1); ++j)
            out << (j ? "\t" : "") << io::fmt(f[g.index(i, j)]);
        out << "\n";
    }
}

// ---- immersion geodesic runs ----------------------------------------------

inline RunRecord run_geodesic_case(const Scenario& sc, const fs::path& dir) {
    RunRecord rec;
    rec.scenario = sc;

    GeodesicState init = build_initial_state(sc);
    BackgroundDensity mu = BackgroundDensity::from_immersion(init.f);
    Trajectory traj = integrate(init, mu, sc.integrator);

    fs::create_directories(dir / "snapshots");
    {
        io::TsvWriter inv(dir / "invariants.tsv");
        inv.comment("t\tenergy\tmax_rho_dev\tmax_constraint\tp_min\tp_max");
        for (const auto& row : traj.log)
            inv.row(row.t, row.energy, row.max_rho_dev, row.max_constraint,
                    row.p_min, row.p_max);
    }
    {
        io::TsvWriter idx(dir / "snapshots" / "index.tsv");
        idx.comment("snapshot\tt\tfile");
        char name[32];
        for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
            std::snprintf(name, sizeof(name), "snap_%06zu.tsv", k);
            idx.row(static_cast<std::int64_t>(k), traj.snapshots[k].t, name);
            if (sc.kase == Case::whip_curve)
                write_curve_snapshot(dir / "snapshots" / name, traj.snapshots[k]);
            else
                write_surface_snapshot(dir / "snapshots" / name, traj.snapshots[k]);
        }
    }

    if (!traj.log.empty()) {
        const double e0 = traj.log.front().energy;
        double drift = 0.0, rho = 0.0, cons = 0.0;
        for (const auto& row : traj.log) {
            drift = std::max(drift, std::abs(row.energy - e0));
            rho = std::max(rho, row.max_rho_dev);
            cons = std::max(cons, row.max_constraint);
        }
        rec.summary["energy_initial"] = e0;
        rec.summary["energy_final"] = traj.log.back().energy;
        rec.summary["energy_drift_rel"] = e0 != 0 ? drift / std::abs(e0) : drift;
        rec.summary["max_rho_dev"] = rho;
        rec.summary["max_constraint_residual"] = cons;
        rec.summary["t_final"] = traj.log.back().t;
        if (sc.integrator.renormalize)
            rec.summary["renormalizations"] = static_cast<double>(traj.renormalizations);
    }
    if (sc.initial.family == "circle_rotation" && !traj.snapshots.empty()) {
        const GeodesicState& last = traj.snapshots.back();
        DiscreteImmersion exact = exact_rotation_curve(sc.n1, sc.initial.omega, last.t);
        rec.summary["oracle_sup_error"] =
            linf_norm(lin_comb(1.0, last.f.displacement(), -1.0, exact.displacement()));
    }
    rec.failed = traj.failed;
    rec.failure = traj.failure;
    return rec;
}

// ---- Euler runs -------------------------------------------------------------

inline ScalarField build_vorticity(const Scenario& sc, const ParamGrid& g) {
    if (sc.initial.family == "shear")
        return make_shear_vorticity(g, sc.initial.amplitude, sc.initial.wavenumber);
    if (sc.initial.family == "random_field")
        return make_random_vorticity(g, sc.seed, sc.initial.smoothness, sc.initial.amplitude);
    throw SchemaError("initial/family",
                      "family '" + sc.initial.family + "' does not fit the euler case");
}

inline RunRecord run_euler_case(const Scenario& sc, const fs::path& dir) {
    RunRecord rec;
    rec.scenario = sc;
    const ParamGrid g(sc.n1, sc.n2 ? sc.n2 : sc.n1);
    VorticityField w(build_vorticity(sc, g));
    const ScalarField omega0 = w.omega;
    DiscreteImmersion flow = make_torus_identity(g.size(0), g.size(1));
    BackgroundDensity mu = BackgroundDensity::uniform(g);

    const double dt = sc.integrator.dt;
    const long steps = std::lround(sc.integrator.t_end / dt);
    const double e0 = kinetic_energy(velocity_of(w));
    const double z0 = enstrophy(w);

    fs::create_directories(dir / "snapshots");
    io::TsvWriter inv(dir / "invariants.tsv");
    inv.comment("t\tenergy\tenstrophy\tmax_rho_dev\tomega_min\tomega_max");

    double max_rho = 0.0, e_drift = 0.0, z_drift = 0.0;
    auto log_state = [&](double t) {
        ScalarField rho = rho_of(flow, mu);
        double dev = 0.0;
        for (double v : rho) dev = std::max(dev, std::abs(v - 1.0));
        max_rho = std::max(max_rho, dev);
        const double e = kinetic_energy(velocity_of(w));
        const double z = enstrophy(w);
        e_drift = std::max(e_drift, std::abs(e - e0));
        z_drift = std::max(z_drift, std::abs(z - z0));
        inv.row(t, e, z, dev,
                *std::min_element(w.omega.begin(), w.omega.end()),
                *std::max_element(w.omega.begin(), w.omega.end()));
    };
    auto snapshot = [&](long k, std::size_t idx) {
        char name[32];
        std::snprintf(name, sizeof(name), "omega_%06zu.tsv", idx);
        write_matrix(dir / "snapshots" / name, w.omega);
        std::snprintf(name, sizeof(name), "flow_%06zu.tsv", idx);
        io::TsvWriter fw(dir / "snapshots" / name);
        fw.comment("theta1\ttheta2\tx\ty");
        VecField pts = flow.points_wrapped();
        for (std::size_t i = 0; i < g.nodes(); ++i)
            fw.row(g.coord(0, i), g.coord(1, i), pts.at(0, i), pts.at(1, i));
        (void)k;
    };

    log_state(0.0);
    std::size_t snap_idx = 0;
    snapshot(0, snap_idx++);
    try {
        // half-step vorticity updates provide the stage velocities for the
        // Lagrangian map at t, t + dt/2 and t + dt; the endpoint sampler is
        // reused as the next step's starting sampler
        auto sampler = std::make_unique<VelocitySampler>(velocity_of(w));
        for (long n = 0; n < steps; ++n) {
            VorticityField w_half = step_euler_vorticity(w, dt / 2);
            VelocitySampler s_half(velocity_of(w_half));
            VorticityField w_next = step_euler_vorticity(w_half, dt / 2);
            auto s_next = std::make_unique<VelocitySampler>(velocity_of(w_next));
            const VelocitySampler* stages[3] = {sampler.get(), &s_half, s_next.get()};
            auto at = [&](double t) -> const VelocitySampler& {
                const double local = (t - n * dt) / dt;
                return *stages[local < 0.25 ? 0 : (local < 0.75 ? 1 : 2)];
            };
            flow = advect_flowmap(flow, at, n * dt, dt);
            w = std::move(w_next);
            sampler = std::move(s_next);
            log_state((n + 1) * dt);
            if ((n + 1) % sc.integrator.output_stride == 0 || n + 1 == steps)
                snapshot(n + 1, snap_idx++);
        }
    } catch (const Error& e) {
        rec.failed = true;
        rec.failure = e.what();
    }

    ScalarField diff = lin_comb(1.0, w.omega, -1.0, omega0);
    rec.summary["energy_drift_rel"] = e0 != 0 ? e_drift / e0 : e_drift;
    rec.summary["enstrophy_drift_rel"] = z0 != 0 ? z_drift / z0 : z_drift;
    rec.summary["omega_change_inf"] = linf_norm(diff);
    rec.summary["flow_max_rho_dev"] = max_rho;
    rec.summary["mean_vorticity_drift"] =
        std::abs(VorticityField::mean_of(w.omega) - w.initial_mean);
    return rec;
}

// ---- projection defect study ------------------------------------------------

inline RunRecord run_projection_study(const Scenario& sc, const fs::path& dir) {
    RunRecord rec;
    rec.scenario = sc;
    io::TsvWriter tab(dir / "defects.tsv");
    tab.comment("n\tl\ttrial\tidempotency\torthogonality\tconstraint_norm\tdense_disagreement");
    double worst_idem = 0.0, worst_orth = 0.0, worst_cons = 0.0, worst_dense = 0.0;

    for (int n : sc.study.sizes) {
        DiscreteImmersion f = make_perturbed_circle(n);
        GeometryCache c = build_geometry(f, BackgroundDensity::from_immersion(f));
        for (int trial = 0; trial < sc.study.trials; ++trial) {
            TangentField x = random_smooth_vec(c.grid, 2, sc.seed + 977 * trial + n);
            // l = 0 row: the L2 projection
            {
                ProjectionResult pr = l2_project(c, x, sc.integrator.solver_tol);
                ProjectionResult twice = l2_project(c, pr.h_mu, sc.integrator.solver_tol);
                const double idem = linf_norm(lin_comb(1.0, twice.h_mu, -1.0, pr.h_mu));
                double dense_err = 0.0;
                if (static_cast<std::size_t>(n) * n <= dense::kMaxDenseNodes &&
                    c.grid.nodes() <= 64) {
                    TangentField d = dense::l2_project_dense(c, x);
                    dense_err = linf_norm(lin_comb(1.0, pr.h_mu, -1.0, d));
                }
                tab.row(static_cast<std::int64_t>(n), static_cast<std::int64_t>(0),
                        static_cast<std::int64_t>(trial), idem, pr.orthogonality_defect,
                        pr.constraint_norm, dense_err);
                worst_idem = std::max(worst_idem, idem);
                worst_orth = std::max(worst_orth, pr.orthogonality_defect);
                worst_cons = std::max(worst_cons, pr.constraint_norm);
                worst_dense = std::max(worst_dense, dense_err);
            }
            for (int l : sc.study.orders) {
                ProjectionResult pr = hk_project(c, x, l, sc.integrator.solver_tol);
                ProjectionResult twice = hk_project(c, pr.h_mu, l, sc.integrator.solver_tol);
                const double idem = linf_norm(lin_comb(1.0, twice.h_mu, -1.0, pr.h_mu));
                double dense_err = 0.0;
                if (c.grid.nodes() <= 32) {
                    TangentField d = dense::hk_project_dense(c, x, l);
                    dense_err = linf_norm(lin_comb(1.0, pr.h_mu, -1.0, d));
                }
                tab.row(static_cast<std::int64_t>(n), static_cast<std::int64_t>(l),
                        static_cast<std::int64_t>(trial), idem, pr.orthogonality_defect,
                        pr.constraint_norm, dense_err);
                worst_idem = std::max(worst_idem, idem);
                worst_orth = std::max(worst_orth, pr.orthogonality_defect);
                worst_cons = std::max(worst_cons, pr.constraint_norm);
                worst_dense = std::max(worst_dense, dense_err);
            }
        }
    }
    rec.summary["max_idempotency_defect"] = worst_idem;
    rec.summary["max_orthogonality_defect"] = worst_orth;
    rec.summary["max_constraint_norm"] = worst_cons;
    rec.summary["max_dense_disagreement"] = worst_dense;
    return rec;
}

} // namespace run_detail

// Execute one scenario; outputs land in <out_dir>/<name>/. Returns the run
// record (also written as run.json). Wall time goes to timing.txt, the one
// file excluded from the bit-reproducibility guarantee.
inline RunRecord run_scenario(const Scenario& sc) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(sc.out_dir) / sc.name;
    fs::create_directories(dir);
    {
        std::ofstream echo(dir / "scenario.json", std::ios::binary);
        echo << print_scenario(sc);
    }
    const auto t0 = std::chrono::steady_clock::now();
    RunRecord rec;
    try {
        switch (sc.kase) {
            case Case::whip_curve:
            case Case::surface_l2:
                rec = run_detail::run_geodesic_case(sc, dir);
                break;
            case Case::euler_torus:
                rec = run_detail::run_euler_case(sc, dir);
                break;
            case Case::projection_study:
                rec = run_detail::run_projection_study(sc, dir);
                break;
        }
    } catch (const Error& e) {
        rec.scenario = sc;
        rec.failed = true;
        rec.failure = e.what();
    }
    const double secs = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    run_detail::write_run_record(dir, rec);
    {
        std::ofstream t(dir / "timing.txt", std::ios::binary);
        t << io::fmt(secs) << "\n";
    }
    return rec;
}

// Cartesian sweep over the scenario's `sweep` axes, fanned out over worker
// threads; each sub-run gets its own directory plus a summary table.
inline std::vector<RunRecord> run_sweep(const Scenario& base, int threads = 1) {
    namespace fs = std::filesystem;
    if (base.sweep.empty()) throw RangeError("sweep scenario has no sweep axes");

    std::vector<Scenario> runs{base};
    for (const auto& [path, values] : base.sweep) {
        std::vector<Scenario> next;
        for (const Scenario& s : runs)
            for (double v : values) {
                Scenario t = s;
                set_scenario_value(t, path, v);
                next.push_back(std::move(t));
            }
        runs = std::move(next);
    }
    const fs::path dir = fs::path(base.out_dir) / base.name;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "sub_%04zu", i);
        runs[i].out_dir = dir.string();
        runs[i].name = suffix;
        runs[i].sweep.clear();
    }
    {
        std::ofstream echo(dir / "sweep.json", std::ios::binary);
        echo << print_scenario(base);
    }

    std::vector<RunRecord> records(runs.size());
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= runs.size()) break;
            records[i] = run_scenario(runs[i]);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    io::TsvWriter tab(dir / "sweep_summary.tsv");
    tab.comment("run\tdt\toracle_sup_error\tenergy_drift_rel\tfailed");
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& sm = records[i].summary;
        tab.row(static_cast<std::int64_t>(i), runs[i].integrator.dt,
                sm.count("oracle_sup_error") ? sm.at("oracle_sup_error") : 0.0,
                sm.count("energy_drift_rel") ? sm.at("energy_drift_rel") : 0.0,
                static_cast<std::int64_t>(records[i].failed ? 1 : 0));
    }
    return records;
}

// ---- plot-ready data ---------------------------------------------------------

// Re-emit a finished run as plot-friendly files under <run_dir>/plot/:
// per-snapshot xy columns for curves, grid matrices for fields, and one
// t-vs-value series per invariant column. On sweep directories, "convergence"
// collects (dt, oracle error) pairs with the fitted slope in the header.
inline void emit_plotdata(const std::string& run_dir, const std::string& kind = "auto") {
    namespace fs = std::filesystem;
    using nlohmann::json;
    const fs::path dir(run_dir);

    if (kind == "convergence" || (kind == "auto" && fs::exists(dir / "sweep.json"))) {
        if (!fs::exists(dir / "sweep_summary.tsv"))
            throw MissingRunError("no sweep_summary.tsv under " + run_dir);
        std::ifstream in(dir / "sweep_summary.tsv");
        std::string line;
        std::vector<std::pair<double, double>> pts;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream is(line);
            double idx, dt, err, drift, failed;
            is >> idx >> dt >> err >> drift >> failed;
            if (failed == 0.0 && err > 0.0) pts.emplace_back(dt, err);
        }
        if (pts.size() < 2) throw MissingRunError("not enough successful runs for a slope");
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (auto [dt, err] : pts) {
            const double x = std::log(dt), y = std::log(err);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        const double n = static_cast<double>(pts.size());
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        fs::create_directories(dir / "plot");
        io::TsvWriter t(dir / "plot" / "convergence.tsv");
        t.comment("dt\terror   (measured slope " + io::fmt(slope) + ")");
        for (auto [dt, err] : pts) t.row(dt, err);
        return;
    }

    if (!fs::exists(dir / "run.json"))
        throw MissingRunError("no run.json under " + run_dir);
    std::ifstream rec_in(dir / "run.json");
    json rec = json::parse(rec_in);
    const std::string kase = rec.at("scenario").at("case").get<std::string>();
    fs::create_directories(dir / "plot");

    if (kind == "auto" || kind == "invariants") {
        std::ifstream in(dir / "invariants.tsv");
        std::string header;
        std::getline(in, header);
        std::vector<std::string> cols;
        {
            std::istringstream hs(header.substr(header.find('#') + 1));
            std::string c;
            while (hs >> c) cols.push_back(c);
        }
        std::vector<std::vector<double>> data(cols.size());
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream is(line);
            for (auto& col : data) {
                double v;
                is >> v;
                col.push_back(v);
            }
        }
        for (std::size_t c = 1; c < cols.size(); ++c) {
            io::TsvWriter t(dir / "plot" / (cols[c] + ".tsv"));
            t.comment("t\t" + cols[c]);
            for (std::size_t i = 0; i < data[0].size(); ++i) t.row(data[0][i], data[c][i]);
        }
    }

    if ((kind == "auto" || kind == "curves") && kase == "whip_curve") {
        for (const auto& entry : fs::directory_iterator(dir / "snapshots")) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("snap_", 0) != 0) continue;
            std::ifstream in(entry.path());
            io::TsvWriter t(dir / "plot" / (name.substr(0, name.size() - 4) + ".xy"));
            t.comment("x\ty");
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty() || line[0] == '#') continue;
                std::istringstream is(line);
                double th, x, y;
                is >> th >> x >> y;
                t.row(x, y);
            }
        }
    }

    if ((kind == "auto" || kind == "fields") && kase == "euler_torus") {
        for (const auto& entry : fs::directory_iterator(dir / "snapshots")) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("omega_", 0) != 0) continue;
            fs::copy_file(entry.path(), dir / "plot" / name,
                          fs::copy_options::overwrite_existing);
        }
    }
}

} // namespace volimm
