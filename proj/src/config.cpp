#include "kgp/config.hpp"

#include "kgp/fields.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace kgp {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::check_model: return "check-model";
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::energy_decay: return "energy-decay";
        case ExperimentKind::resolvent: return "resolvent";
        case ExperimentKind::plemelj: return "plemelj";
        case ExperimentKind::equilibrium: return "equilibrium";
        case ExperimentKind::scattering: return "scattering";
    }
    return "?";
}

std::optional<ExperimentKind> experiment_from_string(const std::string& s) {
    for (auto k : {ExperimentKind::check_model, ExperimentKind::simulate,
                   ExperimentKind::energy_decay, ExperimentKind::resolvent,
                   ExperimentKind::plemelj, ExperimentKind::equilibrium,
                   ExperimentKind::scattering})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

ConfigError::ConfigError(const std::vector<std::string>& errs)
    : std::runtime_error([&] {
          std::string m = "configuration invalid:";
          for (const auto& e : errs) m += "\n  - " + e;
          return m;
      }()),
      errors(errs) {}

namespace {

struct Errors {
    std::vector<std::string> list;
    void add(const std::string& where, const std::string& what) {
        list.push_back(where + ": " + what);
    }
};

double get_num(const json& j, const std::string& where, const char* key, Errors& errs,
               std::optional<double> fallback = std::nullopt) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        errs.add(where + "." + key, "missing required number");
        return 0.0;
    }
    if (!j[key].is_number()) {
        errs.add(where + "." + key, "must be a number");
        return fallback.value_or(0.0);
    }
    return j[key].get<double>();
}

long long get_int(const json& j, const std::string& where, const char* key, Errors& errs,
                  std::optional<long long> fallback = std::nullopt) {
    if (!j.contains(key)) {
        if (fallback) return *fallback;
        errs.add(where + "." + key, "missing required integer");
        return 0;
    }
    if (!j[key].is_number_integer()) {
        errs.add(where + "." + key, "must be an integer");
        return fallback.value_or(0);
    }
    return j[key].get<long long>();
}

Vec3 get_vec3(const json& j, const std::string& where, const char* key, Errors& errs,
              const Vec3& fallback) {
    if (!j.contains(key)) return fallback;
    const auto& a = j[key];
    if (!a.is_array() || a.size() != 3 || !a[0].is_number()) {
        errs.add(where + "." + key, "must be an array of 3 numbers");
        return fallback;
    }
    return Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

std::vector<double> get_num_list(const json& j, const std::string& where, const char* key,
                                 Errors& errs, std::vector<double> fallback = {}) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_array()) {
        errs.add(where + "." + key, "must be an array of numbers");
        return fallback;
    }
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number()) {
            errs.add(where + "." + key, "must contain only numbers");
            return fallback;
        }
        out.push_back(v.get<double>());
    }
    return out;
}

ProfileSpec parse_profile(const json& j, const std::string& where, Errors& errs) {
    ProfileSpec p;
    p.amplitude = get_num(j, where, "amplitude", errs);
    p.support_radius = get_num(j, where, "support_radius", errs);
    std::string shape = j.value("shape", "truncated-gaussian");
    if (shape == "truncated-gaussian") {
        p.shape = ProfileShape::truncated_gaussian;
        p.width = get_num(j, where, "width", errs, 0.3);
    } else if (shape == "bspline-bump") {
        p.shape = ProfileShape::bspline_bump;
    } else {
        errs.add(where + ".shape", "unknown shape '" + shape +
                                       "' (expected truncated-gaussian or bspline-bump)");
    }
    return p;
}

FieldItemSpec parse_field_item(const json& j, const std::string& where, Errors& errs) {
    FieldItemSpec f;
    f.component = static_cast<int>(get_int(j, where, "component", errs, 0));
    std::string slot = j.value("slot", "phi");
    if (slot == "phi" || slot == "psi0") f.slot = 0;
    else if (slot == "pi" || slot == "psi1") f.slot = 1;
    else errs.add(where + ".slot", "must be phi|pi (or psi0|psi1)");
    std::string kind = j.value("kind", "bump");
    if (kind == "bump") f.kind = FieldItemSpec::Kind::bump;
    else if (kind == "gaussian") f.kind = FieldItemSpec::Kind::gaussian;
    else errs.add(where + ".kind", "must be bump or gaussian");
    f.center = get_vec3(j, where, "center", errs, Vec3::Zero());
    f.radius = get_num(j, where, "radius", errs, 1.0);
    f.amplitude = get_num(j, where, "amplitude", errs, 1.0);
    if (!(f.radius > 0.0)) errs.add(where + ".radius", "must be > 0");
    return f;
}

Eigen::MatrixXd parse_coeff(const json& j, const std::string& where, const char* key,
                            int d, Errors& errs, double fallback) {
    if (!j.contains(key)) return fallback * Eigen::MatrixXd::Identity(d, d);
    if (j[key].is_number()) return j[key].get<double>() * Eigen::MatrixXd::Identity(d, d);
    if (j[key].is_array() && static_cast<int>(j[key].size()) == d) {
        Eigen::MatrixXd m(d, d);
        for (int r = 0; r < d; ++r) {
            const auto& row = j[key][r];
            if (!row.is_array() || static_cast<int>(row.size()) != d) {
                errs.add(where + "." + key, "rows must have d entries");
                return fallback * Eigen::MatrixXd::Identity(d, d);
            }
            for (int c = 0; c < d; ++c) m(r, c) = row[c].get<double>();
        }
        return m;
    }
    errs.add(where + "." + key, "must be a scalar or a d x d array");
    return fallback * Eigen::MatrixXd::Identity(d, d);
}

FitSpec parse_fit(const json& j, const std::string& where, Errors& errs) {
    FitSpec f;
    std::string kind = j.value("kind", "power");
    if (kind == "power") f.kind = DecayKind::power;
    else if (kind == "exponential") f.kind = DecayKind::exponential;
    else errs.add(where + ".kind", "must be power or exponential");
    f.t_lo = get_num(j, where, "t_lo", errs);
    f.t_hi = get_num(j, where, "t_hi", errs);
    f.radius = get_num(j, where, "radius", errs, 2.0);
    if (!(f.t_hi > f.t_lo)) errs.add(where, "fit window must satisfy t_hi > t_lo");
    return f;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({origin + ": " + e.what()});
    }
    Errors errs;
    ExperimentConfig cfg;

    if (j.contains("experiment")) {
        auto kind = experiment_from_string(j["experiment"].get<std::string>());
        if (!kind) errs.add("experiment", "unknown experiment '" +
                                              j["experiment"].get<std::string>() + "'");
        else cfg.experiment = *kind;
    }
    cfg.seed = static_cast<uint64_t>(get_int(j, "", "seed", errs, 1));
    cfg.threads = static_cast<int>(get_int(j, "", "threads", errs, 0));
    cfg.output_dir = j.value("output_dir", "out");
    cfg.a3_threshold_factor = get_num(j, "", "a3_threshold_factor", errs, 1e-10);

    if (!j.contains("model")) {
        errs.add("model", "missing required section");
    } else {
        const json& m = j["model"];
        cfg.model.d = static_cast<int>(get_int(m, "model", "d", errs, 1));
        cfg.model.masses = get_num_list(m, "model", "masses", errs);
        if (cfg.model.masses.empty() && !m.contains("masses"))
            errs.add("model.masses", "missing required list");
        cfg.model.omega = get_num(m, "model", "omega", errs);
        cfg.model.box_length = get_num(m, "model", "box_length", errs);
        cfg.model.grid_n = static_cast<int>(get_int(m, "model", "grid_n", errs));
        cfg.model.dt = get_num(m, "model", "dt", errs);
        if (m.contains("profiles") && m["profiles"].is_array()) {
            int i = 0;
            for (const auto& p : m["profiles"])
                cfg.model.profiles.push_back(
                    parse_profile(p, "model.profiles[" + std::to_string(i++) + "]", errs));
        } else {
            errs.add("model.profiles", "missing required list");
        }
        for (const auto& e : cfg.model.validate()) errs.add("model", e);
    }

    if (j.contains("initial")) {
        InitialSpec init;
        const json& in = j["initial"];
        if (in.contains("field_items") && in["field_items"].is_array()) {
            int i = 0;
            for (const auto& f : in["field_items"]) {
                auto item =
                    parse_field_item(f, "initial.field_items[" + std::to_string(i++) + "]", errs);
                if (item.component < 0 || item.component >= cfg.model.d)
                    errs.add("initial.field_items", "component out of range");
                init.field_items.push_back(item);
            }
        }
        init.q0 = get_vec3(in, "initial", "q0", errs, Vec3::Zero());
        init.p0 = get_vec3(in, "initial", "p0", errs, Vec3::Zero());
        init.subtract_mean = in.value("subtract_mean", false);
        cfg.initial = init;
    }

    if (j.contains("covariance")) {
        const json& c = j["covariance"];
        CovarianceSpec cov;
        cov.chi_radius = get_num(c, "covariance", "chi_radius", errs, 2.0);
        cov.chi_amplitude = get_num(c, "covariance", "chi_amplitude", errs, 1.0);
        const int d = std::max(1, cfg.model.d);
        cov.c00 = parse_coeff(c, "covariance", "c00", d, errs, 1.0);
        cov.c01 = parse_coeff(c, "covariance", "c01", d, errs, 0.0);
        cov.c10 = parse_coeff(c, "covariance", "c10", d, errs, 0.0);
        cov.c11 = parse_coeff(c, "covariance", "c11", d, errs, 1.0);
        double sq = get_num(c, "covariance", "sigma_q", errs, 0.3);
        double sp = get_num(c, "covariance", "sigma_p", errs, 0.3);
        cov.particle_cov = Mat6::Zero();
        cov.particle_cov.topLeftCorner<3, 3>() = sq * sq * Mat3::Identity();
        cov.particle_cov.bottomRightCorner<3, 3>() = sp * sp * Mat3::Identity();
        for (const auto& e : cov.validate(cfg.model.d, cfg.model.box_length))
            errs.add("covariance", e);
        cfg.covariance = cov;
    }

    if (j.contains("functionals")) {
        int i = 0;
        for (const auto& f : j["functionals"]) {
            std::string where = "functionals[" + std::to_string(i++) + "]";
            FunctionalSpec spec;
            spec.name = f.value("name", where);
            spec.u = get_vec3(f, where, "u", errs, Vec3::Zero());
            spec.v = get_vec3(f, where, "v", errs, Vec3::Zero());
            if (f.contains("psi_items")) {
                int b = 0;
                for (const auto& item : f["psi_items"]) {
                    auto fi = parse_field_item(
                        item, where + ".psi_items[" + std::to_string(b++) + "]", errs);
                    if (fi.component < 0 || fi.component >= cfg.model.d)
                        errs.add(where, "psi component out of range");
                    spec.psi_items.push_back(fi);
                }
            }
            cfg.functionals.push_back(std::move(spec));
        }
    }

    if (j.contains("simulate")) {
        const json& s = j["simulate"];
        cfg.simulate.t_max = get_num(s, "simulate", "t_max", errs, 10.0);
        cfg.simulate.sample_stride =
            static_cast<int>(get_int(s, "simulate", "sample_stride", errs, 10));
        cfg.simulate.norm_radii = get_num_list(s, "simulate", "norm_radii", errs);
    }

    if (j.contains("energy_decay")) {
        const json& s = j["energy_decay"];
        cfg.energy_decay.run.t_max = get_num(s, "energy_decay", "t_max", errs, 14.0);
        cfg.energy_decay.run.sample_stride =
            static_cast<int>(get_int(s, "energy_decay", "sample_stride", errs, 10));
        cfg.energy_decay.run.norm_radii =
            get_num_list(s, "energy_decay", "norm_radii", errs, {2.0});
        if (s.contains("fits"))
            for (const auto& f : s["fits"])
                cfg.energy_decay.fits.push_back(parse_fit(f, "energy_decay.fits", errs));
    }

    if (j.contains("resolvent")) {
        const json& s = j["resolvent"];
        cfg.resolvent.contour.sigma = get_num(s, "resolvent", "sigma", errs, 0.1);
        cfg.resolvent.contour.dx = get_num(s, "resolvent", "dx", errs, 5e-3);
        cfg.resolvent.contour.x_max = get_num(s, "resolvent", "x_max", errs, 60.0);
        cfg.resolvent.contour.tail_tol = get_num(s, "resolvent", "tail_tol", errs, 1e-7);
        cfg.resolvent.t_max = get_num(s, "resolvent", "t_max", errs, 20.0);
        cfg.resolvent.t_step = get_num(s, "resolvent", "t_step", errs, 0.01);
        if (s.contains("fit")) cfg.resolvent.fit = parse_fit(s["fit"], "resolvent.fit", errs);
        if (!(cfg.resolvent.contour.sigma > 0.0)) errs.add("resolvent.sigma", "must be > 0");
    }

    if (j.contains("plemelj")) {
        const json& s = j["plemelj"];
        cfg.plemelj.x_values = get_num_list(s, "plemelj", "x_values", errs, {1.5});
        cfg.plemelj.epsilons = get_num_list(s, "plemelj", "epsilons", errs, {1e-2, 1e-3});
        cfg.plemelj.v = get_vec3(s, "plemelj", "v", errs, Vec3{1, 0, 0});
        cfg.plemelj.angular_order =
            static_cast<int>(get_int(s, "plemelj", "angular_order", errs, 26));
    }

    if (j.contains("equilibrium")) {
        const json& s = j["equilibrium"];
        cfg.equilibrium.t_list = get_num_list(s, "equilibrium", "t_list", errs, {0, 4, 8, 12});
        cfg.equilibrium.sample_count =
            static_cast<int>(get_int(s, "equilibrium", "sample_count", errs, 2000));
        cfg.equilibrium.trajectory_samples =
            static_cast<int>(get_int(s, "equilibrium", "trajectory_samples", errs, 0));
        cfg.equilibrium.moment_radius =
            get_num(s, "equilibrium", "moment_radius", errs, 2.0);
        cfg.equilibrium.s_max = get_num(s, "equilibrium", "s_max", errs, 0.0);
        cfg.equilibrium.ds = get_num(s, "equilibrium", "ds", errs, 0.0);
    }

    if (j.contains("scattering")) {
        const json& s = j["scattering"];
        cfg.scattering.s_max = get_num(s, "scattering", "s_max", errs, 0.0);
        cfg.scattering.ds = get_num(s, "scattering", "ds", errs, 0.0);
        cfg.scattering.t_values = get_num_list(s, "scattering", "t_values", errs, {4.0, 8.0});
    }

    // cross-section requirements
    switch (cfg.experiment) {
        case ExperimentKind::simulate:
        case ExperimentKind::energy_decay:
            if (!cfg.initial) errs.add("initial", "required by this experiment");
            break;
        case ExperimentKind::equilibrium:
            if (!cfg.covariance) errs.add("covariance", "required by equilibrium");
            if (cfg.functionals.empty()) errs.add("functionals", "required by equilibrium");
            break;
        case ExperimentKind::scattering:
            if (!cfg.covariance) errs.add("covariance", "required by scattering");
            if (cfg.functionals.empty()) errs.add("functionals", "required by scattering");
            break;
        default: break;
    }

    if (!errs.list.empty()) throw ConfigError(errs.list);
    cfg.config_echo = j.dump(2);
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot open file"});
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

FullState build_initial_state(const PreparedModel& model, const InitialSpec& spec) {
    FullState y = zero_state(model);
    for (const auto& item : spec.field_items) {
        RealField f = item.kind == FieldItemSpec::Kind::bump
                          ? make_bump(model.grid, item.center, item.radius, item.amplitude)
                          : make_gaussian(model.grid, item.center, item.radius, item.amplitude);
        RealField& dst = item.slot == 0 ? y.field.phi[item.component] : y.field.pi[item.component];
        for (std::size_t i = 0; i < f.size(); ++i) dst[i] += f[i];
    }
    if (spec.subtract_mean) {
        for (int n = 0; n < model.d(); ++n) {
            subtract_mean(y.field.phi[n]);
            subtract_mean(y.field.pi[n]);
        }
    }
    y.particle.q = spec.q0;
    y.particle.p = spec.p0;
    return y;
}

TestFunctional build_functional(const PreparedModel& model, const FunctionalSpec& spec) {
    TestFunctional z = zero_functional(model);
    for (const auto& item : spec.psi_items) {
        RealField f = item.kind == FieldItemSpec::Kind::bump
                          ? make_bump(model.grid, item.center, item.radius, item.amplitude)
                          : make_gaussian(model.grid, item.center, item.radius, item.amplitude);
        RealField& dst = item.slot == 0 ? z.psi0[item.component] : z.psi1[item.component];
        for (std::size_t i = 0; i < f.size(); ++i) dst[i] += f[i];
    }
    z.u = spec.u;
    z.v = spec.v;
    return z;
}

}  // namespace kgp
