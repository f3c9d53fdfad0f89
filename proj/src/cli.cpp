#include "lnared/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lnared/analysis.hpp"
#include "lnared/config.hpp"
#include "lnared/csvio.hpp"
#include "lnared/ensemble.hpp"
#include "lnared/errors.hpp"

namespace lnared {

namespace {

using nlohmann::json;

struct CliOptions {
    std::string model = "phospho-example";
    std::string out_dir = ".";
    int threads = 0;           // 0 = LNAR_THREADS env var, then hardware
    double rtol = -1.0;        // negative = keep config default
    double atol = -1.0;
    std::string tspan;         // "start:end"
    int grid = -1;
    std::vector<double> eps;   // sweep list, or single override elsewhere
    long long n = -1;
    double dt = -1.0;
    long long seed = -1;
    std::string system = "reduced";
    std::string which = "both";
};

void add_common(CLI::App* cmd, CliOptions& o) {
    cmd->add_option("--model", o.model, "builtin name or path to a model JSON file");
    cmd->add_option("--out", o.out_dir, "output directory (created if missing)");
    cmd->add_option("--threads", o.threads, "worker threads (never changes the numbers)");
    cmd->add_option("--rtol", o.rtol, "integrator relative tolerance");
    cmd->add_option("--atol", o.atol, "integrator absolute tolerance");
    cmd->add_option("--tspan", o.tspan, "time span start:end");
    cmd->add_option("--grid", o.grid, "number of output grid points");
}

int resolve_threads(const CliOptions& o) {
    if (o.threads > 0) return o.threads;
    if (const char* env = std::getenv("LNAR_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 0; // let the ensemble pick hardware concurrency
}

void apply_overrides(const CliOptions& o, RunConfig& run) {
    if (o.rtol > 0.0) run.rtol = o.rtol;
    if (o.atol > 0.0) run.atol = o.atol;
    if (!o.tspan.empty()) {
        const auto colon = o.tspan.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("--tspan expects start:end, got '" + o.tspan + "'");
        }
        try {
            run.t0 = std::stod(o.tspan.substr(0, colon));
            run.t1 = std::stod(o.tspan.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("--tspan expects numbers, got '" + o.tspan + "'");
        }
        if (!(run.t1 > run.t0)) throw ConfigError("--tspan end must exceed start");
    }
    if (o.grid >= 0) {
        if (o.grid < 2) throw ConfigError("--grid must be at least 2");
        run.t_points = o.grid;
    }
    if (o.n >= 0) {
        if (o.n < 2) throw ConfigError("--n must be at least 2");
        run.ensemble_n = static_cast<std::size_t>(o.n);
    }
    if (o.dt > 0.0) run.ensemble_dt = o.dt;
    if (o.seed >= 0) run.seed = static_cast<std::uint64_t>(o.seed);
    if (!o.eps.empty()) {
        run.eps_list = o.eps;
        std::sort(run.eps_list.begin(), run.eps_list.end(), std::greater<double>());
        for (const double e : run.eps_list) {
            if (!(e > 0.0)) throw ConfigError("--eps entries must be positive");
        }
    }
}

std::filesystem::path prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    return dir;
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
}

json manifest_entry(const std::string& file, const std::vector<std::string>& columns) {
    return json{{"path", file}, {"columns", columns}};
}

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i).transpose()));
    return rows;
}

struct Loaded {
    LoadedModel lm;
    SingularPerturbedLNA sp;
};

Loaded load_and_transform(const CliOptions& o) {
    LoadedModel lm = load_config(o.model);
    apply_overrides(o, lm.run);
    const LnaModel lna = assemble_lna(*lm.net);
    SingularPerturbedLNA sp = transform_to_sp(lna, lm.tm, *lm.net);
    return {std::move(lm), std::move(sp)};
}

std::vector<std::string> coord_names(const TransformMatrices& tm) {
    std::vector<std::string> names = tm.x_names;
    if (names.size() != static_cast<std::size_t>(tm.A_x.rows())) {
        names.clear();
        for (Eigen::Index i = 0; i < tm.A_x.rows(); ++i) names.push_back("x" + std::to_string(i));
    }
    return names;
}

std::vector<std::string> fast_names(const TransformMatrices& tm) {
    std::vector<std::string> names = tm.z_names;
    if (names.size() != static_cast<std::size_t>(tm.A_z.rows())) {
        names.clear();
        for (Eigen::Index i = 0; i < tm.A_z.rows(); ++i) names.push_back("z" + std::to_string(i));
    }
    return names;
}

int cmd_reduce(const CliOptions& o) {
    auto [lm, sp] = load_and_transform(o);
    const auto& run = lm.run;
    const auto out = prepare_out_dir(o.out_dir);
    const IntegrateOptions integ{run.rtol, run.atol};

    const ReducedModel red = reduce(sp, run.x0, run.z0, run.t0);
    const auto grid = run.t_grid();
    const auto rhs = [&](double t, const Vec& y, Vec& dy) { dy = red.drift(y, t); };
    const auto traj = integrate(rhs, run.x0, run.t0, run.t1, grid, integ);

    json out_doc;
    out_doc["model"] = o.model;
    out_doc["t"] = grid;
    json xbar = json::array(), g1 = json::array(), g2 = json::array(), margins = json::array();
    bool all_hurwitz = true;
    Vec z_warm = run.z0;
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        const Vec& x = traj.y[i];
        const Vec z = solve_gamma1(sp, x, traj.t[i], z_warm);
        z_warm = z;
        const auto stab = check_hurwitz(sp, x, traj.t[i], z);
        all_hurwitz = all_hurwitz && stab.is_hurwitz;
        xbar.push_back(vec_to_json(x));
        g1.push_back(vec_to_json(z));
        g2.push_back(mat_to_json(red.gamma2(x, traj.t[i])));
        margins.push_back(stab.max_real_part);
    }
    out_doc["xbar"] = xbar;
    out_doc["gamma1"] = g1;
    out_doc["gamma2"] = g2;
    out_doc["hurwitz_margin"] = margins;
    out_doc["all_hurwitz"] = all_hurwitz;
    out_doc["x_names"] = coord_names(lm.tm);
    out_doc["z_names"] = fast_names(lm.tm);
    write_json(out_doc, out / "reduce.json");
    return 0;
}

int cmd_moments(const CliOptions& o) {
    auto [lm, sp] = load_and_transform(o);
    const auto& run = lm.run;
    const auto out = prepare_out_dir(o.out_dir);
    const IntegrateOptions integ{run.rtol, run.atol};
    const double eps = run.eps_list.empty() ? lm.net->epsilon : run.eps_list.front();
    const auto grid = run.t_grid();
    const auto xn = coord_names(lm.tm);
    const auto zn = fast_names(lm.tm);

    json manifest;
    manifest["command"] = "moments";
    manifest["model"] = o.model;
    manifest["eps"] = eps;
    manifest["t_span"] = {run.t0, run.t1};
    json files = json::array();

    if (o.which == "original" || o.which == "both") {
        const auto init =
            OriginalMomentState::deterministic(run.x0, run.z0, run.psi_x0, run.psi_z0);
        const auto traj = integrate_original_moments(sp, init, run.t0, run.t1, grid, eps, integ);
        const auto table = table_from_original(traj, xn, zn);
        write_csv(table, (out / "moments_original.csv").string());
        files.push_back(manifest_entry("moments_original.csv", table.header));
    }
    if (o.which == "reduced" || o.which == "both") {
        const ReducedModel red = reduce(sp, run.x0, run.z0, run.t0);
        const auto init = ReducedMomentState::deterministic(run.x0, run.psi_x0);
        const auto traj = integrate_reduced_moments(red, init, run.t0, run.t1, grid, integ);
        const auto table = table_from_reduced(traj, xn);
        write_csv(table, (out / "moments_reduced.csv").string());
        files.push_back(manifest_entry("moments_reduced.csv", table.header));
    }
    if (files.empty()) {
        throw ConfigError("--which must be original, reduced, or both (got '" + o.which + "')");
    }
    manifest["files"] = files;
    write_json(manifest, out / "manifest.json");
    return 0;
}

int cmd_sde(const CliOptions& o) {
    auto [lm, sp] = load_and_transform(o);
    const auto& run = lm.run;
    const auto out = prepare_out_dir(o.out_dir);
    const IntegrateOptions integ{run.rtol, run.atol};
    const double eps = run.eps_list.empty() ? lm.net->epsilon : run.eps_list.front();

    EnsembleConfig cfg;
    cfg.n_realizations = run.ensemble_n;
    cfg.master_seed = run.seed;
    cfg.t_grid = run.t_grid();
    cfg.n_threads = resolve_threads(o);
    cfg.dt = run.ensemble_dt;
    if (o.system == "original" && o.dt <= 0.0) {
        cfg.dt = std::min(cfg.dt, eps / 20.0); // default obeys the resolution rule
    }

    // The path span must be a whole number of steps covering the grid.
    const double t_end = cfg.t_grid.back();
    const double span_steps = std::ceil((t_end - run.t0) / cfg.dt - 1e-9);
    const double t1 = run.t0 + span_steps * cfg.dt;

    EnsembleStats stats;
    if (o.system == "original") {
        const auto path = compute_path(sp, run.x0, run.z0, run.t0, t1, cfg.dt, eps, integ);
        stats = simulate_ensemble(sp, path, eps, run.psi_x0, run.psi_z0, cfg);
    } else if (o.system == "reduced") {
        const ReducedModel red = reduce(sp, run.x0, run.z0, run.t0);
        const auto path = compute_path(red, run.x0, run.t0, t1, cfg.dt, integ);
        stats = simulate_ensemble(red, path, run.psi_x0, cfg);
    } else {
        throw ConfigError("--system must be original or reduced (got '" + o.system + "')");
    }

    const auto table = table_from_stats(stats);
    write_csv(table, (out / "sde.csv").string());
    json manifest;
    manifest["command"] = "sde";
    manifest["model"] = o.model;
    manifest["system"] = o.system;
    manifest["eps"] = eps;
    manifest["n_realizations"] = stats.n_realizations;
    manifest["dt"] = cfg.dt;
    manifest["seed"] = cfg.master_seed;
    manifest["files"] = json::array({manifest_entry("sde.csv", table.header)});
    write_json(manifest, out / "manifest.json");
    return 0;
}

int cmd_sweep(const CliOptions& o) {
    auto [lm, sp] = load_and_transform(o);
    const auto& run = lm.run;
    const auto out = prepare_out_dir(o.out_dir);

    std::vector<double> eps_list = run.eps_list;
    if (eps_list.empty()) eps_list = {0.1, 0.05, 0.02, 0.01};

    SweepSetup setup;
    setup.x0 = run.x0;
    setup.z0 = run.z0;
    setup.psi_x0 = run.psi_x0;
    setup.psi_z0 = run.psi_z0;
    setup.t0 = run.t0;
    setup.t1 = run.t1;
    setup.t_grid = run.t_grid();
    setup.integ = IntegrateOptions{run.rtol, run.atol};
    const SweepResult result = epsilon_sweep(sp, eps_list, setup);

    const auto table = table_from_sweep(result);
    write_csv(table, (out / "sweep.csv").string());

    const auto fit_json = [](const SlopeFit& f) {
        return json{{"slope", f.slope},
                    {"intercept", f.intercept},
                    {"max_residual", f.max_residual},
                    {"degenerate", f.degenerate}};
    };
    json doc;
    doc["command"] = "sweep";
    doc["model"] = o.model;
    doc["t_span"] = {setup.t0, setup.t1};
    doc["eps"] = eps_list;
    json e_x = json::array(), e_m = json::array(), e_M = json::array();
    for (const auto& p : result.points) {
        e_x.push_back(p.err.e_x);
        e_m.push_back(p.err.e_m);
        e_M.push_back(p.err.e_M);
    }
    doc["e_x"] = e_x;
    doc["e_m"] = e_m;
    doc["e_M"] = e_M;
    doc["fit_x"] = fit_json(result.fit_x);
    doc["fit_m"] = fit_json(result.fit_m);
    doc["fit_M"] = fit_json(result.fit_M);
    doc["files"] = json::array({manifest_entry("sweep.csv", table.header)});
    write_json(doc, out / "sweep.json");
    return 0;
}

int cmd_check(const CliOptions& o) {
    auto [lm, sp] = load_and_transform(o);
    const auto& run = lm.run;
    const auto out = prepare_out_dir(o.out_dir);
    const IntegrateOptions integ{run.rtol, run.atol};
    const double eps = run.eps_list.empty() ? lm.net->epsilon : run.eps_list.front();

    const auto grid = run.t_grid();
    Vec y0(sp.n_s() + sp.n_f());
    y0 << run.x0, run.z0;
    const auto rhs = [&](double t, const Vec& y, Vec& dy) {
        const Vec x = y.head(sp.n_s());
        const Vec z = y.tail(sp.n_f());
        dy.head(sp.n_s()) = sp.f_x(x, z, t);
        dy.tail(sp.n_f()) = sp.f_z(x, z, t, eps) / eps;
    };
    const auto traj = integrate(rhs, y0, run.t0, run.t1, grid, integ);
    std::vector<PathPoint> points;
    points.reserve(traj.t.size());
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
        points.push_back({traj.y[i].head(sp.n_s()), traj.y[i].tail(sp.n_f()), traj.t[i]});
    }
    const AssumptionReport report = check_assumptions(sp, points);

    json doc;
    doc["command"] = "check";
    doc["model"] = o.model;
    doc["eps"] = eps;
    doc["all_pass"] = report.all_pass;
    doc["worst_margin"] = report.worst_margin;
    json pts = json::array();
    for (const auto& p : report.points) {
        pts.push_back(json{{"t", p.t},
                           {"hurwitz_margin", p.hurwitz_margin},
                           {"b2_cond", p.b2_cond},
                           {"sigma_z0_norm", p.sigma_z0_norm},
                           {"scaling_residual", p.scaling_residual},
                           {"pass", p.pass},
                           {"note", p.note}});
    }
    doc["points"] = pts;
    write_json(doc, out / "check.json");

    if (!report.all_pass) {
        std::size_t bad = 0;
        for (const auto& p : report.points) bad += p.pass ? 0 : 1;
        throw ValidationError("assumption check failed at " + std::to_string(bad) + " of " +
                              std::to_string(report.points.size()) +
                              " points (see check.json)");
    }
    return 0;
}

} // namespace

int run_command(int argc, const char* const* argv) {
    CLI::App app{"Slow/fast reduction and moment cross-validation for LNA models"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    CliOptions o;
    auto* reduce_cmd = app.add_subcommand("reduce", "solve the slow manifold and emit a summary");
    add_common(reduce_cmd, o);
    auto* moments_cmd =
        app.add_subcommand("moments", "integrate original and/or reduced moment equations");
    add_common(moments_cmd, o);
    moments_cmd->add_option("--eps", o.eps, "epsilon for the original system")->delimiter(',');
    moments_cmd->add_option("--which", o.which, "original | reduced | both");
    auto* sde_cmd = app.add_subcommand("sde", "Euler-Maruyama ensemble with standard errors");
    add_common(sde_cmd, o);
    sde_cmd->add_option("--eps", o.eps, "epsilon for the original system")->delimiter(',');
    sde_cmd->add_option("--system", o.system, "original | reduced");
    sde_cmd->add_option("--n", o.n, "number of realizations");
    sde_cmd->add_option("--dt", o.dt, "Euler-Maruyama step");
    sde_cmd->add_option("--seed", o.seed, "master seed");
    auto* sweep_cmd = app.add_subcommand("sweep", "epsilon sweep with log-log slope fits");
    add_common(sweep_cmd, o);
    sweep_cmd->add_option("--eps", o.eps, "comma-separated epsilon list")->delimiter(',');
    auto* check_cmd =
        app.add_subcommand("check", "validate the reduction assumptions along a trajectory");
    add_common(check_cmd, o);
    check_cmd->add_option("--eps", o.eps, "epsilon for the deterministic path")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    try {
        if (app.got_subcommand(reduce_cmd)) return cmd_reduce(o);
        if (app.got_subcommand(moments_cmd)) return cmd_moments(o);
        if (app.got_subcommand(sde_cmd)) return cmd_sde(o);
        if (app.got_subcommand(sweep_cmd)) return cmd_sweep(o);
        if (app.got_subcommand(check_cmd)) return cmd_check(o);
    } catch (const LnaError& e) {
        const json err{{"error", e.kind()}, {"message", e.what()}};
        std::cerr << err.dump() << std::endl;
        const bool input_problem =
            e.kind() == "config" || e.kind() == "validation" || e.kind() == "transform";
        return input_problem ? 1 : 2;
    } catch (const std::exception& e) {
        const json err{{"error", "internal"}, {"message", e.what()}};
        std::cerr << err.dump() << std::endl;
        return 2;
    }
    return 64;
}

} // namespace lnared
