#include "kgp/scattering.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace kgp;

namespace {

ResponseKernel kernel_on(const PreparedModel& model, double s_max, double ds) {
    std::vector<double> s_grid;
    long long m = std::llround(s_max / ds);
    for (long long j = 0; j <= m; ++j) s_grid.push_back(j * ds);
    return inverse_laplace_kernel(model, s_grid, ContourParams{});
}

double profile_norm(const ScatteringProfiles& p) {
    double s = 0.0;
    auto add = [&](const std::vector<std::array<PairHat, 3>>& set) {
        for (const auto& comp : set)
            for (const auto& pair : comp) {
                for (const auto& c : pair.h0) s += std::norm(c);
                for (const auto& c : pair.h1) s += std::norm(c);
            }
    };
    add(p.alpha);
    add(p.beta);
    return std::sqrt(s);
}

double alpha_diff(const ScatteringProfiles& a, const ScatteringProfiles& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.alpha.size(); ++c)
        for (int i = 0; i < 3; ++i)
            for (std::size_t f = 0; f < a.alpha[c][i].h0.size(); ++f) {
                s += std::norm(a.alpha[c][i].h0[f] - b.alpha[c][i].h0[f]);
                s += std::norm(a.alpha[c][i].h1[f] - b.alpha[c][i].h1[f]);
            }
    return std::sqrt(s);
}

double functional_max_diff(const PreparedModel& model, const TestFunctional& a,
                           const TestFunctional& b) {
    double m = 0.0;
    for (int n = 0; n < model.d(); ++n) {
        m = std::max(m, test::max_abs_diff(a.psi0[n], b.psi0[n]));
        m = std::max(m, test::max_abs_diff(a.psi1[n], b.psi1[n]));
    }
    return m;
}

}  // namespace

TEST_SUITE("scattering") {

TEST_CASE("zero coupling: all profiles vanish and psi_z = psi") {
    ModelConfig cfg = test::small_model(16, 16.0, 1.0, 0.0);
    cfg.omega = 1.6;
    PreparedModel model = PreparedModel::build(cfg);
    ResponseKernel kernel = kernel_on(model, 6.0, 0.02);
    ScatteringProfiles profiles = build_alpha_beta(model, kernel, 6.0, 0.02);
    CHECK(profile_norm(profiles) == 0.0);

    TestFunctional z = zero_functional(model);
    z.psi0[0] = make_bump(model.grid, Vec3::Zero(), 1.5, 1.0);
    z.u = Vec3{0.4, 0.0, 0.0};
    TestFunctional psi_z = build_psi_z(model, profiles, z);
    CHECK(functional_max_diff(model, psi_z, z) < 1e-13);
}

TEST_CASE("profiles are odd under point reflection") {
    ModelConfig cfg = test::small_model(16, 16.0, 1.0, 0.5);
    cfg.omega = 1.6;
    PreparedModel model = PreparedModel::build(cfg);
    ResponseKernel kernel = kernel_on(model, 6.0, 0.02);
    ScatteringProfiles profiles = build_alpha_beta(model, kernel, 6.0, 0.02);

    RealField a0 = model.engine->inverse(profiles.alpha[0][0].h0);
    RealField b1 = model.engine->inverse(profiles.beta[0][2].h1);
    double scale = std::max(test::max_abs(a0), test::max_abs(b1));
    const int n = model.grid.n;
    double worst = 0.0;
    for_each_cell(model.grid, [&](std::size_t flat, int i, int j, int k) {
        std::size_t mirror = model.grid.index((n - i) % n, (n - j) % n, (n - k) % n);
        worst = std::max(worst, std::abs(a0[flat] + a0[mirror]));
        worst = std::max(worst, std::abs(b1[flat] + b1[mirror]));
    });
    CHECK(worst < 1e-10 * scale);
}

TEST_CASE("horizon guard and kernel-grid checks") {
    ModelConfig cfg = test::small_model(16, 16.0, 1.0, 0.5);
    PreparedModel model = PreparedModel::build(cfg);
    ResponseKernel kernel = kernel_on(model, 6.0, 0.02);
    CHECK_THROWS_WITH_AS(build_alpha_beta(model, kernel, 7.5, 0.02),
                         doctest::Contains("horizon"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(build_alpha_beta(model, kernel, 6.5, 0.02),
                         doctest::Contains("cover"), std::invalid_argument);
}

TEST_CASE("truncation convergence of the time quadrature") {
    // the s-integrals converge at the resonance damping rate; the horizon
    // doubling must shrink the change and stay well below the profile norm
    ModelConfig cfg;
    cfg.d = 1;
    cfg.masses = {1.0};
    cfg.omega = 2.0;
    cfg.box_length = 48.0;
    cfg.grid_n = 48;
    cfg.dt = 0.01;
    cfg.profiles = {ProfileSpec{2.0, 1.5, ProfileShape::truncated_gaussian, 0.5}};
    PreparedModel model = PreparedModel::build(cfg);
    REQUIRE(check_conditions(model).a1_holds);
    ResponseKernel kernel = kernel_on(model, 20.0, 0.02);
    ScatteringProfiles p10 = build_alpha_beta(model, kernel, 10.0, 0.02);
    ScatteringProfiles p15 = build_alpha_beta(model, kernel, 15.0, 0.02);
    ScatteringProfiles p20 = build_alpha_beta(model, kernel, 20.0, 0.02);
    double norm = profile_norm(p20);
    double d10 = alpha_diff(p10, p20) / norm;
    double d15 = alpha_diff(p15, p20) / norm;
    CHECK(d10 < 0.6);
    CHECK(d15 < 0.75 * d10);
}

TEST_CASE("theta vanishes for zero psi and scales out of zero coupling") {
    ModelConfig cfg = test::small_model(16, 16.0, 1.0, 0.5);
    cfg.omega = 1.6;
    PreparedModel model = PreparedModel::build(cfg);
    ResponseKernel kernel = kernel_on(model, 6.0, 0.02);
    ScatteringProfiles profiles = build_alpha_beta(model, kernel, 6.0, 0.02);

    TestFunctional no_field = zero_functional(model);
    no_field.u = Vec3{1.0, 0.0, 0.0};
    auto theta = build_theta(model, profiles, no_field);
    double s = 0.0;
    for (const auto& row : theta)
        for (const auto& pair : row) {
            for (const auto& c : pair.h0) s += std::norm(c);
            for (const auto& c : pair.h1) s += std::norm(c);
        }
    CHECK(s == 0.0);
}

TEST_CASE("massless inner factor vanishes outside the influence interval") {
    // resolved gaussian data: band-limit tails at the 1e-12 floor
    ModelConfig cfg;
    cfg.d = 1;
    cfg.masses = {0.0};
    cfg.omega = 1.0;
    cfg.box_length = 8.0;
    cfg.grid_n = 128;
    cfg.dt = 0.01;
    cfg.profiles = {ProfileSpec{1.0, 1.2, ProfileShape::truncated_gaussian, 0.15}};
    PreparedModel model = PreparedModel::build(cfg);

    // psi must be off-center: a centered even test pair pairs to zero
    // against the odd profile gradients at every s
    const Vec3 center{0.8, 0.0, 0.0};
    TestFunctional z = zero_functional(model);
    z.psi0[0] = make_gaussian(model.grid, center, 0.15, 1.0);
    z.psi1[0] = make_gaussian(model.grid, center, 0.15, 0.5);

    const double influence = 1.2 + 0.8 + 1.2;  // R_rho + |center| + psi radius
    double peak = 0.0;
    for (double s = 0.0; s <= influence; s += 0.25)
        peak = std::max(peak, std::abs(theta_inner_factor(model, 0, 0, z, s)));
    double outside = 0.0;
    for (double s = influence + 0.2; s <= 3.6; s += 0.25)
        outside = std::max(outside, std::abs(theta_inner_factor(model, 0, 0, z, s)));
    CHECK(outside < 1e-12 * peak);

    // with mass the overlap only decays polynomially
    ModelConfig cfg_m = cfg;
    cfg_m.masses = {1.0};
    PreparedModel massive = PreparedModel::build(cfg_m);
    double outside_m = 0.0;
    for (double s = influence + 0.2; s <= 3.6; s += 0.25)
        outside_m = std::max(outside_m, std::abs(theta_inner_factor(massive, 0, 0, z, s)));
    CHECK(outside_m > 1e-9 * peak);
}

TEST_CASE("psi_z is linear in the functional") {
    ModelConfig cfg = test::small_model(16, 16.0, 1.0, 0.5);
    cfg.omega = 1.6;
    PreparedModel model = PreparedModel::build(cfg);
    ResponseKernel kernel = kernel_on(model, 6.0, 0.02);
    ScatteringProfiles profiles = build_alpha_beta(model, kernel, 6.0, 0.02);

    TestFunctional z1 = test::random_functional(model, 61);
    TestFunctional z2 = test::random_functional(model, 67);
    const double a = 0.7, b = -1.3;
    TestFunctional zc = zero_functional(model);
    for (int n = 0; n < model.d(); ++n)
        for (std::size_t i = 0; i < zc.psi0[n].size(); ++i) {
            zc.psi0[n][i] = a * z1.psi0[n][i] + b * z2.psi0[n][i];
            zc.psi1[n][i] = a * z1.psi1[n][i] + b * z2.psi1[n][i];
        }
    zc.u = a * z1.u + b * z2.u;
    zc.v = a * z1.v + b * z2.v;

    TestFunctional p1 = build_psi_z(model, profiles, z1);
    TestFunctional p2 = build_psi_z(model, profiles, z2);
    TestFunctional pc = build_psi_z(model, profiles, zc);
    double worst = 0.0, scale = 0.0;
    for (int n = 0; n < model.d(); ++n)
        for (std::size_t i = 0; i < pc.psi0[n].size(); ++i) {
            worst = std::max(worst, std::abs(pc.psi0[n][i] - a * p1.psi0[n][i] - b * p2.psi0[n][i]));
            worst = std::max(worst, std::abs(pc.psi1[n][i] - a * p1.psi1[n][i] - b * p2.psi1[n][i]));
            scale = std::max(scale, std::abs(pc.psi0[n][i]));
        }
    CHECK(worst < 1e-12 * scale);
}

TEST_CASE("profiles scale linearly with the coupling amplitude when it is small") {
    auto profiles_at = [&](double amp) {
        ModelConfig cfg = test::small_model(16, 16.0, 1.0, amp);
        cfg.omega = 1.6;
        PreparedModel model = PreparedModel::build(cfg);
        ResponseKernel kernel = kernel_on(model, 6.0, 0.02);
        return profile_norm(build_alpha_beta(model, kernel, 6.0, 0.02));
    };
    double n1 = profiles_at(1e-3);
    double n2 = profiles_at(2e-3);
    CHECK(n2 / n1 == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("residual second moment: free case and direct expansion at t = 0") {
    ModelConfig cfg_free = test::small_model(16, 16.0, 1.0, 0.0);
    cfg_free.omega = 1.6;
    PreparedModel free_model = PreparedModel::build(cfg_free);
    CovarianceSpec cov = CovarianceSpec::simple(1, 1.0, 0.2, 0.0, 2.0, 0.3, 0.3);
    SpectralDensity density_f = assemble_spectral_density(cov, free_model);
    ResponseKernel kernel_f = kernel_on(free_model, 6.0, 0.02);
    ScatteringProfiles prof_f = build_alpha_beta(free_model, kernel_f, 6.0, 0.02);

    TestFunctional z = zero_functional(free_model);
    z.psi0[0] = make_bump(free_model.grid, Vec3::Zero(), 1.5, 1.0);
    TestFunctional psi_z = build_psi_z(free_model, prof_f, z);
    double res = residual_second_moment(free_model, density_f, cov.particle_cov, z, psi_z,
                                        3.0, 0.01);
    CHECK(std::abs(res) < 1e-10);

    // coupled model at t = 0: compare with the three-term bilinear expansion
    ModelConfig cfg = test::small_model(16, 16.0, 1.0, 0.5);
    cfg.omega = 1.6;
    PreparedModel model = PreparedModel::build(cfg);
    SpectralDensity density = assemble_spectral_density(cov, model);
    ResponseKernel kernel = kernel_on(model, 6.0, 0.02);
    ScatteringProfiles profiles = build_alpha_beta(model, kernel, 6.0, 0.02);
    TestFunctional zc = test::random_functional(model, 71);
    TestFunctional psi_zc = build_psi_z(model, profiles, zc);
    double r0 = residual_second_moment(model, density, cov.particle_cov, zc, psi_zc, 0.0,
                                       cfg.dt);
    TestFunctional ext = psi_zc;  // field-only functional
    double expand = covariance_form(density, cov.particle_cov, model, zc, zc) -
                    2.0 * covariance_form(density, cov.particle_cov, model, zc, ext) +
                    covariance_form(density, cov.particle_cov, model, ext, ext);
    CHECK(r0 == doctest::Approx(expand).epsilon(1e-10));
    CHECK(r0 >= 0.0);
}

}  // TEST_SUITE
