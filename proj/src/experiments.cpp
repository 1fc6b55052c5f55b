#include "kgp/experiments.hpp"

#include "kgp/scattering.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace kgp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

struct RunLog {
    std::ofstream file;
    explicit RunLog(const fs::path& path) : file(path) {}
    void line(const std::string& s) {
        file << s << "\n";
        file.flush();
        std::cerr << s << "\n";
    }
};

struct CsvWriter {
    std::ofstream file;
    CsvWriter(const fs::path& path, const std::vector<std::string>& header) : file(path) {
        for (std::size_t i = 0; i < header.size(); ++i)
            file << header[i] << (i + 1 < header.size() ? "," : "\n");
    }
    void row(const std::vector<double>& values, const std::string& prefix = "") {
        if (!prefix.empty()) file << prefix << ",";
        for (std::size_t i = 0; i < values.size(); ++i)
            file << format_full(values[i]) << (i + 1 < values.size() ? "," : "\n");
    }
};

json matrix_json(const Mat3& m) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) {
        json r = json::array();
        for (int j = 0; j < 3; ++j) r.push_back(m(i, j));
        rows.push_back(r);
    }
    return rows;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

json condition_json(const ConditionReport& r) {
    json j;
    j["K"] = matrix_json(r.K);
    j["K0"] = matrix_json(r.K0);
    j["m_star"] = r.m_star;
    j["eig_A1"] = {r.eig_A1[0], r.eig_A1[1], r.eig_A1[2]};
    j["eig_A1p"] = {r.eig_A1p[0], r.eig_A1p[1], r.eig_A1p[2]};
    j["a3_min_abs"] = r.a3_min_abs;
    j["a3_threshold"] = r.a3_threshold;
    j["a1_holds"] = r.a1_holds;
    j["a1p_holds"] = r.a1p_holds;
    j["a3_holds"] = r.a3_holds;
    return j;
}

void write_metadata(const fs::path& dir, const ExperimentConfig& cfg,
                    const std::vector<uint64_t>& seeds) {
    json meta;
    meta["version"] = kVersionString;
    meta["experiment"] = to_string(cfg.experiment);
    meta["seed"] = cfg.seed;
    meta["threads"] = cfg.threads;
    json seed_list = json::array();
    for (uint64_t s : seeds) seed_list.push_back(s);
    meta["derived_seeds"] = seed_list;
    meta["config"] = json::parse(cfg.config_echo);
    write_json(dir / "metadata.json", meta);
}

// conditions each experiment depends on; false entries are not checked
struct Required {
    bool a1 = false, a1p = false, a3 = false;
};

Required required_conditions(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::check_model: return {true, true, true};
        case ExperimentKind::simulate: return {false, true, false};
        case ExperimentKind::energy_decay: return {true, true, true};
        case ExperimentKind::resolvent: return {true, false, false};
        case ExperimentKind::plemelj: return {};
        case ExperimentKind::equilibrium: return {true, true, true};
        case ExperimentKind::scattering: return {true, true, true};
    }
    return {};
}

double auto_horizon(const ExperimentConfig& cfg) {
    double r_max = 0.0;
    for (const auto& p : cfg.model.profiles) r_max = std::max(r_max, p.support_radius);
    return 0.5 * cfg.model.box_length - r_max - 1.0;
}

ResponseKernel kernel_for_horizon(const PreparedModel& model, const ExperimentConfig& cfg,
                                  double s_max, double ds) {
    std::vector<double> s_grid;
    long long m = std::llround(s_max / ds);
    s_grid.reserve(m + 1);
    for (long long j = 0; j <= m; ++j) s_grid.push_back(j * ds);
    return inverse_laplace_kernel(model, s_grid, cfg.resolvent.contour);
}

void export_trajectory(const fs::path& path, const PreparedModel& model,
                       const Trajectory& traj, const std::vector<double>& radii) {
    std::vector<std::string> header{"t", "q1", "q2", "q3", "p1", "p2", "p3", "H"};
    for (double r : radii) header.push_back("norm_energy_R" + format_full(r));
    for (double r : radii) header.push_back("norm_state_R" + format_full(r));
    CsvWriter csv(path, header);
    (void)model;
    for (std::size_t s = 0; s < traj.sample_t.size(); ++s) {
        // locate the per-step record at this sample time
        std::size_t step = static_cast<std::size_t>(std::llround(traj.sample_t[s] / traj.dt));
        std::vector<double> row{traj.sample_t[s]};
        for (int a = 0; a < 3; ++a) row.push_back(traj.q[step][a]);
        for (int a = 0; a < 3; ++a) row.push_back(traj.p[step][a]);
        row.push_back(traj.energy[s]);
        for (std::size_t r = 0; r < radii.size(); ++r) row.push_back(traj.norm_energy[r][s]);
        for (std::size_t r = 0; r < radii.size(); ++r) row.push_back(traj.norm_state[r][s]);
        csv.row(row);
    }
}

int run_check_model(const fs::path& dir, const PreparedModel&, const ConditionReport& report,
                    RunLog& log) {
    (void)dir;
    if (!(report.a1_holds && report.a1p_holds && report.a3_holds)) {
        log.line("check-model: conditions failed (A1=" + std::to_string(report.a1_holds) +
                 " A1'=" + std::to_string(report.a1p_holds) +
                 " A3=" + std::to_string(report.a3_holds) + ")");
        return 2;
    }
    log.line("check-model: all conditions hold");
    return 0;
}

int run_simulate(const fs::path& dir, const PreparedModel& model, const ExperimentConfig& cfg,
                 RunLog& log) {
    FullState y0 = build_initial_state(model, *cfg.initial);
    EvolveOptions opts;
    opts.sample_stride = cfg.simulate.sample_stride;
    opts.norm_radii = cfg.simulate.norm_radii;
    Trajectory traj = evolve(model, y0, cfg.simulate.t_max, model.config.dt, opts);
    export_trajectory(dir / "trajectory.csv", model, traj, cfg.simulate.norm_radii);
    log.line("simulate: wrote trajectory.csv (" + std::to_string(traj.sample_t.size()) +
             " samples)");
    return 0;
}

int run_energy_decay(const fs::path& dir, const PreparedModel& model,
                     const ExperimentConfig& cfg, RunLog& log) {
    FullState y0 = build_initial_state(model, *cfg.initial);
    EvolveOptions opts;
    opts.sample_stride = cfg.energy_decay.run.sample_stride;
    opts.norm_radii = cfg.energy_decay.run.norm_radii;
    Trajectory traj = evolve(model, y0, cfg.energy_decay.run.t_max, model.config.dt, opts);
    export_trajectory(dir / "decay.csv", model, traj, opts.norm_radii);

    json fits = json::array();
    for (const auto& f : cfg.energy_decay.fits) {
        auto it = std::find_if(opts.norm_radii.begin(), opts.norm_radii.end(),
                               [&](double r) { return std::abs(r - f.radius) < 1e-12; });
        if (it == opts.norm_radii.end())
            throw std::invalid_argument("energy-decay fit radius not in norm_radii");
        std::size_t idx = it - opts.norm_radii.begin();
        DecayFit fit = fit_decay(traj.sample_t, traj.norm_state[idx], f.kind, f.t_lo, f.t_hi);
        json fj;
        fj["kind"] = f.kind == DecayKind::power ? "power" : "exponential";
        fj["radius"] = f.radius;
        fj["t_lo"] = fit.t_lo;
        fj["t_hi"] = fit.t_hi;
        fj["rate_or_slope"] = fit.rate_or_slope;
        fj["residual"] = fit.residual;
        fits.push_back(fj);
        log.line("energy-decay: fit " + fj["kind"].get<std::string>() +
                 " rate/slope = " + format_full(fit.rate_or_slope));
    }
    write_json(dir / "fits.json", fits);
    return 0;
}

int run_resolvent(const fs::path& dir, const PreparedModel& model, const ExperimentConfig& cfg,
                  RunLog& log) {
    std::vector<double> t_grid;
    long long m = std::llround(cfg.resolvent.t_max / cfg.resolvent.t_step);
    for (long long j = 0; j <= m; ++j) t_grid.push_back(j * cfg.resolvent.t_step);
    ResponseKernel kernel = inverse_laplace_kernel(model, t_grid, cfg.resolvent.contour);

    std::vector<std::string> header{"t"};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) header.push_back("N" + std::to_string(i + 1) + std::to_string(j + 1));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            header.push_back("Ndot" + std::to_string(i + 1) + std::to_string(j + 1));
    CsvWriter csv(dir / "kernel.csv", header);
    for (std::size_t s = 0; s < kernel.t.size(); ++s) {
        std::vector<double> row{kernel.t[s]};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) row.push_back(kernel.N[s](i, j));
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) row.push_back(kernel.Ndot[s](i, j));
        csv.row(row);
    }

    json meta;
    meta["sigma"] = kernel.contour.sigma;
    meta["dx"] = kernel.contour.dx;
    meta["x_max"] = kernel.contour.x_max;
    meta["tail_tol"] = kernel.contour.tail_tol;
    meta["max_imag_residue"] = kernel.max_imag_residue;
    write_json(dir / "resolvent_meta.json", meta);

    if (cfg.resolvent.fit) {
        std::vector<double> mag(kernel.t.size());
        for (std::size_t s = 0; s < kernel.t.size(); ++s) mag[s] = kernel.N[s].norm();
        DecayFit fit = fit_decay(kernel.t, mag, cfg.resolvent.fit->kind,
                                 cfg.resolvent.fit->t_lo, cfg.resolvent.fit->t_hi);
        json fj;
        fj["kind"] = fit.kind == DecayKind::power ? "power" : "exponential";
        fj["rate_or_slope"] = fit.rate_or_slope;
        fj["residual"] = fit.residual;
        write_json(dir / "fit.json", fj);
        log.line("resolvent: kernel decay fit rate/slope = " + format_full(fit.rate_or_slope));
    }
    log.line("resolvent: wrote kernel.csv, max imaginary residue " +
             format_full(kernel.max_imag_residue));
    return 0;
}

int run_plemelj(const fs::path& dir, const PreparedModel& model, const ExperimentConfig& cfg,
                RunLog& log) {
    auto radials = build_radial_profiles(model.config);
    std::vector<std::string> header{"x", "surface_integral", "limiting_extrapolated",
                                    "rel_diff"};
    for (double e : cfg.plemelj.epsilons) header.push_back("im_h_eps" + format_full(e));
    CsvWriter csv(dir / "plemelj.csv", header);
    for (double x : cfg.plemelj.x_values) {
        double surf = plemelj_im_h(model.config, radials, x, cfg.plemelj.v,
                                   cfg.plemelj.angular_order);
        std::vector<double> eps_vals;
        for (double e : cfg.plemelj.epsilons)
            eps_vals.push_back(std::imag(h_radial(model.config, radials, Cplx{e, x})) *
                               cfg.plemelj.v.squaredNorm());
        double extr = plemelj_im_h_limiting(model.config, radials, x, cfg.plemelj.v,
                                            cfg.plemelj.epsilons);
        double rel = std::abs(surf - extr) / std::max(std::abs(surf), 1e-300);
        std::vector<double> row{x, surf, extr, rel};
        for (double ev : eps_vals) row.push_back(ev);
        csv.row(row);
        log.line("plemelj: x = " + format_full(x) + " rel diff " + format_full(rel));
    }
    return 0;
}

int run_equilibrium(const fs::path& dir, const PreparedModel& model,
                    const ExperimentConfig& cfg, RunLog& log) {
    const CovarianceSpec& cov = *cfg.covariance;
    SpectralDensity density = assemble_spectral_density(cov, model);
    LimitCovariance limit = limit_covariance(density, model);

    double s_max = cfg.equilibrium.s_max > 0.0 ? cfg.equilibrium.s_max : auto_horizon(cfg);
    double ds = cfg.equilibrium.ds > 0.0 ? cfg.equilibrium.ds : cfg.model.dt;
    s_max = std::llround(s_max / ds) * ds;
    ResponseKernel kernel = kernel_for_horizon(model, cfg, s_max, ds);
    ScatteringProfiles profiles = build_alpha_beta(model, kernel, s_max, ds);

    std::vector<std::pair<std::string, TestFunctional>> zs;
    for (const auto& f : cfg.functionals) zs.emplace_back(f.name, build_functional(model, f));

    EnsembleOptions opts;
    opts.sample_count = cfg.equilibrium.sample_count;
    opts.trajectory_samples = cfg.equilibrium.trajectory_samples;
    opts.dt = cfg.model.dt;
    opts.t_list = cfg.equilibrium.t_list;
    opts.base_seed = cfg.seed;
    opts.moment_radius = cfg.equilibrium.moment_radius;
    opts.threads = cfg.threads;
    EnsembleStats stats = ensemble_run(model, cov, zs, opts);

    CsvWriter csv(dir / "stats.csv",
                  {"t", "functional", "statistic", "empirical", "exact", "se"});
    json summary;
    summary["t_list"] = stats.t_list;
    json per_z = json::array();
    for (std::size_t zi = 0; zi < zs.size(); ++zi) {
        const FunctionalStats& fsz = stats.functionals[zi];
        TestFunctional psi_z = build_psi_z(model, profiles, zs[zi].second);
        double qinf = q_infinity(limit, model, psi_z);
        for (std::size_t ti = 0; ti < stats.t_list.size(); ++ti) {
            auto row = [&](const char* what, double emp, double exact, double se) {
                csv.file << format_full(stats.t_list[ti]) << "," << fsz.name << "," << what
                         << "," << format_full(emp) << "," << format_full(exact) << ","
                         << format_full(se) << "\n";
            };
            row("qt", fsz.empirical_qt[ti], fsz.exact_qt[ti], fsz.qt_se[ti]);
            row("mean", fsz.mean[ti], 0.0, fsz.mean_se[ti]);
            row("char_re", fsz.char_empirical[ti].real(), fsz.char_exact[ti], fsz.char_se[ti]);
            row("char_im", fsz.char_empirical[ti].imag(), 0.0, fsz.char_se[ti]);
        }
        json zj;
        zj["name"] = fsz.name;
        zj["q_infinity"] = qinf;
        zj["exact_qt"] = fsz.exact_qt;
        json gaps = json::array();
        for (std::size_t ti = 0; ti < stats.t_list.size(); ++ti)
            gaps.push_back(std::abs(fsz.exact_qt[ti] - qinf));
        zj["gap_to_q_infinity"] = gaps;
        per_z.push_back(zj);
        log.line("equilibrium: " + fsz.name + " Q_inf = " + format_full(qinf));
    }
    summary["functionals"] = per_z;
    summary["moment_mean"] = stats.moment_mean;
    summary["moment_max_over_avg"] = stats.moment_max_over_avg;
    summary["kernel_horizon"] = s_max;
    write_json(dir / "equilibrium.json", summary);
    return 0;
}

int run_scattering(const fs::path& dir, const PreparedModel& model,
                   const ExperimentConfig& cfg, RunLog& log) {
    const CovarianceSpec& cov = *cfg.covariance;
    SpectralDensity density = assemble_spectral_density(cov, model);

    double s_max = cfg.scattering.s_max > 0.0 ? cfg.scattering.s_max : auto_horizon(cfg);
    double ds = cfg.scattering.ds > 0.0 ? cfg.scattering.ds : cfg.model.dt;
    s_max = std::llround(s_max / ds) * ds;
    ResponseKernel kernel = kernel_for_horizon(model, cfg, s_max, ds);
    ScatteringProfiles profiles = build_alpha_beta(model, kernel, s_max, ds);

    // binary dump of the profiles with a JSON descriptor
    {
        std::ofstream bin(dir / "profiles.bin", std::ios::binary);
        auto dump_pair = [&](const PairHat& p) {
            bin.write(reinterpret_cast<const char*>(p.h0.data()), p.h0.size() * sizeof(Cplx));
            bin.write(reinterpret_cast<const char*>(p.h1.data()), p.h1.size() * sizeof(Cplx));
        };
        for (int c = 0; c < model.d(); ++c)
            for (int i = 0; i < 3; ++i) dump_pair(profiles.alpha[c][i]);
        for (int c = 0; c < model.d(); ++c)
            for (int i = 0; i < 3; ++i) dump_pair(profiles.beta[c][i]);
        json desc;
        desc["layout"] = "alpha[c][i] then beta[c][i], each pair (h0, h1) of complex128 "
                         "spectral coefficients in row-major grid order";
        desc["d"] = model.d();
        desc["grid_n"] = model.grid.n;
        desc["box_length"] = model.grid.box_length;
        desc["s_max"] = s_max;
        desc["ds"] = ds;
        write_json(dir / "profiles.json", desc);
    }

    std::vector<std::pair<std::string, TestFunctional>> zs;
    for (const auto& f : cfg.functionals) zs.emplace_back(f.name, build_functional(model, f));

    CsvWriter csv(dir / "residuals.csv", {"t", "functional", "residual_second_moment"});
    for (const auto& [name, z] : zs) {
        TestFunctional psi_z = build_psi_z(model, profiles, z);
        for (double t : cfg.scattering.t_values) {
            double res =
                residual_second_moment(model, density, cov.particle_cov, z, psi_z, t, cfg.model.dt);
            csv.file << format_full(t) << "," << name << "," << format_full(res) << "\n";
            log.line("scattering: residual(" + name + ", t=" + format_full(t) +
                     ") = " + format_full(res));
        }
    }
    return 0;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg) {
    fs::path dir(cfg.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        std::cerr << "cannot create output directory " << dir << ": " << ec.message() << "\n";
        return 1;
    }
    RunLog log(dir / "run.log");
    try {
        write_metadata(dir, cfg, {cfg.seed});
        PreparedModel model = PreparedModel::build(cfg.model);
        ConditionReport report = check_conditions(model, cfg.a3_threshold_factor);
        write_json(dir / "condition_report.json", condition_json(report));

        Required need = required_conditions(cfg.experiment);
        if ((need.a1 && !report.a1_holds) || (need.a1p && !report.a1p_holds) ||
            (need.a3 && !report.a3_holds)) {
            log.line("model conditions required by " + to_string(cfg.experiment) +
                     " do not hold (A1=" + std::to_string(report.a1_holds) +
                     " A1'=" + std::to_string(report.a1p_holds) +
                     " A3=" + std::to_string(report.a3_holds) + ")");
            return 2;
        }

        switch (cfg.experiment) {
            case ExperimentKind::check_model: return run_check_model(dir, model, report, log);
            case ExperimentKind::simulate: return run_simulate(dir, model, cfg, log);
            case ExperimentKind::energy_decay: return run_energy_decay(dir, model, cfg, log);
            case ExperimentKind::resolvent: return run_resolvent(dir, model, cfg, log);
            case ExperimentKind::plemelj: return run_plemelj(dir, model, cfg, log);
            case ExperimentKind::equilibrium: return run_equilibrium(dir, model, cfg, log);
            case ExperimentKind::scattering: return run_scattering(dir, model, cfg, log);
        }
        return 1;
    } catch (const std::exception& e) {
        log.line(std::string("error: ") + e.what());
        return 1;
    }
}

}  // namespace kgp
