#include "kgp/model.hpp"

#include "kgp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kgp {

namespace {

// C-infinity bridge: 1 at s <= 0, 0 at s >= 1.
double smooth_step_down(double s) {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    auto f = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
    return f(1.0 - s) / (f(1.0 - s) + f(s));
}

double ball_self_convolution(double r, double r0) {
    // overlap volume of two balls of radius r0 at center distance r
    if (r >= 2.0 * r0) return 0.0;
    double h = r0 - 0.5 * r;
    return (2.0 * M_PI / 3.0) * h * h * (2.0 * r0 + 0.5 * r);
}

}  // namespace

double profile_value(const ProfileSpec& spec, double r) {
    r = std::abs(r);
    if (r >= spec.support_radius) return 0.0;
    switch (spec.shape) {
        case ProfileShape::truncated_gaussian: {
            double g = std::exp(-0.5 * r * r / (spec.width * spec.width));
            // cutoff transitions on [R/2, R]
            double s = (r / spec.support_radius - 0.5) * 2.0;
            return spec.amplitude * g * smooth_step_down(s);
        }
        case ProfileShape::bspline_bump: {
            double r0 = 0.5 * spec.support_radius;
            return spec.amplitude * ball_self_convolution(r, r0) / ball_self_convolution(0.0, r0);
        }
    }
    return 0.0;
}

SampledProfile build_profile(const ProfileSpec& spec, const GridSpec& grid,
                             const SpectralEngine& engine) {
    if (!(spec.support_radius > 0.0))
        throw std::invalid_argument("build_profile: support_radius must be > 0");
    if (spec.support_radius >= grid.box_length / 4.0) {
        std::ostringstream msg;
        msg << "build_profile: support radius " << spec.support_radius
            << " must be < L/4 = " << grid.box_length / 4.0
            << " (periodic image overlap guard)";
        throw std::invalid_argument(msg.str());
    }
    SampledProfile p;
    p.spec = spec;
    p.rho = make_real_field(grid);
    for_each_cell(grid, [&](std::size_t flat, int i, int j, int k) {
        p.rho[flat] = profile_value(spec, grid.x_at(i, j, k).norm());
    });
    p.rho_hat = engine.forward(p.rho);
    for (int a = 0; a < 3; ++a) {
        engine.derivative(p.rho_hat, a, p.grad_rho_hat[a]);
        p.grad_rho[a] = engine.inverse(p.grad_rho_hat[a]);
    }
    return p;
}

double radial_fourier_exact(const ProfileSpec& spec, double r) {
    const double R = spec.support_radius;
    auto rho = [&](double s) { return profile_value(spec, s); };
    if (r < 1e-8) {
        return 4.0 * M_PI * simpson([&](double s) { return s * s * rho(s); }, 0.0, R, 2048);
    }
    double integral = simpson([&](double s) { return s * std::sin(r * s) * rho(s); }, 0.0, R, 2048);
    return 4.0 * M_PI / r * integral;
}

RadialProfile::RadialProfile(const ProfileSpec& spec, double k_max, int table_size)
    : spec_(spec), k_max_(k_max), dr_(k_max / (table_size - 1)), table_(table_size) {
    for (int i = 0; i < table_size; ++i) table_[i] = fourier_exact(i * dr_);
}

double RadialProfile::fourier_exact(double r) const { return radial_fourier_exact(spec_, r); }

double RadialProfile::fourier(double r) const {
    r = std::abs(r);
    if (r >= k_max_) return 0.0;
    // Catmull-Rom through the four surrounding table nodes
    double u = r / dr_;
    int i = static_cast<int>(u);
    if (i >= static_cast<int>(table_.size()) - 2) return table_.back();
    double t = u - i;
    auto at = [&](int j) {
        j = std::clamp(j, 0, static_cast<int>(table_.size()) - 1);
        return table_[j];
    };
    double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
    return p1 + 0.5 * t * (p2 - p0 + t * (2 * p0 - 5 * p1 + 4 * p2 - p3 + t * (3 * (p1 - p2) + p3 - p0)));
}

ShellTable build_shell_table(const SampledProfile& p, const GridSpec& grid) {
    ShellTable t;
    const double ku = grid.k_unit();
    t.k_unit2 = ku * ku;
    t.S.assign(grid.max_m2() + 1, Mat3::Zero());
    std::vector<char> seen(grid.max_m2() + 1, 0);
    const double inv_vol = 1.0 / grid.volume();
    const int ny = grid.n / 2;
    for_each_cell(grid, [&](std::size_t flat, int i, int j, int k) {
        int u = grid.mode_m2(i, j, k);
        if (u == 0) return;  // k_i k_j numerator vanishes
        // wavevector with Nyquist components dropped, matching the spectral
        // derivative convention (the shell index keeps the true |k|^2)
        Vec3 kv{i == ny ? 0.0 : grid.wavenumber(i), j == ny ? 0.0 : grid.wavenumber(j),
                k == ny ? 0.0 : grid.wavenumber(k)};
        double w = std::norm(p.rho_hat[flat]) * inv_vol;
        t.S[u] += w * kv * kv.transpose();
        seen[u] = 1;
    });
    for (int u = 0; u <= grid.max_m2(); ++u)
        if (seen[u]) t.occupied.push_back(u);
    return t;
}

std::vector<std::string> ModelConfig::validate() const {
    std::vector<std::string> errs;
    if (d <= 0) errs.push_back("d must be a positive integer");
    if (!(omega > 0.0)) errs.push_back("omega must be > 0");
    if (static_cast<int>(masses.size()) != d)
        errs.push_back("masses must have exactly d entries");
    for (std::size_t n = 0; n < masses.size(); ++n)
        if (masses[n] < 0.0) errs.push_back("mass m_" + std::to_string(n + 1) + " must be >= 0");
    if (static_cast<int>(profiles.size()) != d)
        errs.push_back("profiles must have exactly d entries");
    if (!(box_length > 0.0)) errs.push_back("box_length must be > 0");
    if (grid_n <= 0 || grid_n % 2 != 0) errs.push_back("grid_n must be even and > 0");
    if (!(dt > 0.0)) errs.push_back("dt must be > 0");
    for (std::size_t n = 0; n < profiles.size(); ++n) {
        const auto& p = profiles[n];
        if (!(p.support_radius > 0.0))
            errs.push_back("profile " + std::to_string(n + 1) + ": support_radius must be > 0");
        else if (box_length > 0.0 && p.support_radius >= box_length / 4.0)
            errs.push_back("profile " + std::to_string(n + 1) +
                           ": support_radius must be < L/4 (periodic image overlap guard)");
        if (p.shape == ProfileShape::truncated_gaussian && !(p.width > 0.0))
            errs.push_back("profile " + std::to_string(n + 1) + ": width must be > 0");
    }
    return errs;
}

void ModelConfig::validate_or_throw() const {
    auto errs = validate();
    if (errs.empty()) return;
    std::string joined = "invalid model config:";
    for (const auto& e : errs) joined += "\n  - " + e;
    throw std::invalid_argument(joined);
}

PreparedModel PreparedModel::build(const ModelConfig& config) {
    config.validate_or_throw();
    PreparedModel m;
    m.config = config;
    m.grid = config.grid();
    m.engine = std::make_shared<SpectralEngine>(m.grid);
    m.profiles.reserve(config.d);
    m.shells.reserve(config.d);
    m.omega_n.reserve(config.d);
    for (int n = 0; n < config.d; ++n) {
        m.profiles.push_back(build_profile(config.profiles[n], m.grid, *m.engine));
        m.shells.push_back(build_shell_table(m.profiles.back(), m.grid));
        m.omega_n.push_back(dispersion_table(m.grid, config.masses[n]));
    }
    m.m2_table.resize(m.grid.size());
    for_each_cell(m.grid, [&](std::size_t flat, int i, int j, int k) {
        m.m2_table[flat] = m.grid.mode_m2(i, j, k);
    });
    return m;
}

Mat3 coupling_matrix(const PreparedModel& model, double s2) {
    Mat3 K = Mat3::Zero();
    for (int n = 0; n < model.d(); ++n) {
        const double shift = model.mass(n) * model.mass(n) - s2;
        const ShellTable& t = model.shells[n];
        for (int u : t.occupied) {
            double denom = t.k2_of(u) + shift;
            if (denom <= 0.0) {
                std::ostringstream msg;
                msg << "coupling_matrix: nonpositive denominator " << denom
                    << " at |k|^2 = " << t.k2_of(u) << " for component " << n + 1;
                throw std::domain_error(msg.str());
            }
            K += t.S[u] / denom;
        }
    }
    return 0.5 * (K + K.transpose());  // symmetrize roundoff
}

double m_star_of(const std::vector<double>& masses) {
    double m_star = 0.0;
    bool any = false;
    for (double m : masses)
        if (m != 0.0) {
            m_star = any ? std::min(m_star, m) : m;
            any = true;
        }
    return any ? m_star : 0.0;
}

ConditionReport check_conditions(const PreparedModel& model, double a3_threshold_factor) {
    ConditionReport r;
    r.m_star = m_star_of(model.config.masses);
    r.K = coupling_matrix(model, r.m_star * r.m_star);
    r.K0 = coupling_matrix(model, 0.0);
    const double w2 = model.config.omega * model.config.omega;

    Eigen::SelfAdjointEigenSolver<Mat3> es1((w2 - r.m_star * r.m_star) * Mat3::Identity() - r.K);
    Eigen::SelfAdjointEigenSolver<Mat3> es2(w2 * Mat3::Identity() - r.K0);
    r.eig_A1 = es1.eigenvalues();
    r.eig_A1p = es2.eigenvalues();
    r.a1_holds = r.eig_A1.minCoeff() > 0.0;
    r.a1p_holds = r.eig_A1p.minCoeff() > 0.0;

    // The nonvanishing check samples the continuum radial transform at the
    // lattice shell radii: FFT values of the grid samples carry an aliasing
    // floor that would mask genuine transform zeros.
    double min_abs = std::numeric_limits<double>::infinity();
    double max_abs = 0.0;
    const double ku = model.grid.k_unit();
    for (int n = 0; n < model.d(); ++n) {
        std::vector<char> seen(model.grid.max_m2() + 1, 0);
        for (int u : model.shells[n].occupied) seen[u] = 1;
        double a0 = std::abs(radial_fourier_exact(model.config.profiles[n], 0.0));
        if (a0 > max_abs) max_abs = a0;
        for (int u = 1; u <= model.grid.max_m2(); ++u) {
            if (!seen[u]) continue;
            double a = std::abs(radial_fourier_exact(model.config.profiles[n],
                                                     ku * std::sqrt(double(u))));
            if (a > max_abs) max_abs = a;
            if (a < min_abs) min_abs = a;
        }
    }
    r.a3_min_abs = std::isfinite(min_abs) ? min_abs : 0.0;
    r.a3_threshold = a3_threshold_factor * max_abs;
    r.a3_holds = r.a3_min_abs > r.a3_threshold;
    return r;
}

}  // namespace kgp
