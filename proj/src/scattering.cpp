#include "kgp/scattering.hpp"

#include <cmath>
#include <sstream>

namespace kgp {

namespace {

// trapezoid weight on the uniform s-grid
inline double trap_w(long long j, long long m) { return (j == 0 || j == m) ? 0.5 : 1.0; }

void check_kernel_grid(const ResponseKernel& kernel, double s_max, double ds,
                       long long& m_out) {
    m_out = std::llround(s_max / ds);
    if (std::abs(m_out * ds - s_max) > 1e-9)
        throw std::invalid_argument("build_alpha_beta: s_max must be a multiple of ds");
    if (kernel.t.size() < static_cast<std::size_t>(m_out) + 1)
        throw std::invalid_argument("build_alpha_beta: kernel does not cover [0, s_max]");
    for (long long j = 0; j <= m_out; ++j)
        if (std::abs(kernel.t[j] - j * ds) > 1e-9)
            throw std::invalid_argument("build_alpha_beta: kernel grid does not match ds");
}

}  // namespace

ScatteringProfiles build_alpha_beta(const PreparedModel& model, const ResponseKernel& kernel,
                                    double s_max, double ds) {
    double max_support = 0.0;
    for (const auto& p : model.config.profiles)
        max_support = std::max(max_support, p.support_radius);
    if (!(s_max < 0.5 * model.grid.box_length - max_support)) {
        std::ostringstream msg;
        msg << "build_alpha_beta: horizon s_max = " << s_max
            << " exceeds the box guard L/2 - R_rho = "
            << 0.5 * model.grid.box_length - max_support;
        throw std::invalid_argument(msg.str());
    }
    long long m;
    check_kernel_grid(kernel, s_max, ds, m);

    ScatteringProfiles out;
    out.s_max = s_max;
    out.ds = ds;
    out.alpha.resize(model.d());
    out.beta.resize(model.d());

    const int max_m2 = model.grid.max_m2();
    for (int c = 0; c < model.d(); ++c) {
        const ShellTable& shells = model.shells[c];
        const double mass = model.mass(c);
        // per-shell s-integrals of N_ir(s) against cos(w s), sin(w s)/w, w sin(w s)
        std::vector<Mat3> ic(max_m2 + 1, Mat3::Zero());
        std::vector<Mat3> is_over_w(max_m2 + 1, Mat3::Zero());
        std::vector<Mat3> is_times_w(max_m2 + 1, Mat3::Zero());
        for (int u = 0; u <= max_m2; ++u) {
            // restrict to shells that occur plus the zero mode (cheap skip otherwise)
            if (u != 0 && !std::binary_search(shells.occupied.begin(), shells.occupied.end(), u))
                continue;
            const double w = std::sqrt(shells.k2_of(u) + mass * mass);
            const double cs = std::cos(w * ds), sn = std::sin(w * ds);
            double cj = 1.0, sj = 0.0;  // cos(w s_j), sin(w s_j)
            Mat3 a = Mat3::Zero(), b = Mat3::Zero(), g = Mat3::Zero();
            for (long long j = 0; j <= m; ++j) {
                const double wj = trap_w(j, m) * ds;
                const Mat3& N = kernel.N[j];
                a += wj * cj * N;
                if (w > 0.0) {
                    b += wj * (sj / w) * N;
                    g += wj * (w * sj) * N;
                } else {
                    b += wj * (j * ds) * N;  // sin(ws)/w -> s
                }
                const double c2 = cj * cs - sj * sn;
                sj = sj * cs + cj * sn;
                cj = c2;
            }
            ic[u] = a;
            is_over_w[u] = b;
            is_times_w[u] = g;
        }

        const auto& grad_hat = model.profiles[c].grad_rho_hat;
        for (int i = 0; i < 3; ++i) {
            PairHat& al = out.alpha[c][i];
            PairHat& be = out.beta[c][i];
            al.h0 = make_complex_field(model.grid);
            al.h1 = make_complex_field(model.grid);
            be.h0 = make_complex_field(model.grid);
            be.h1 = make_complex_field(model.grid);
            for (std::size_t flat = 0; flat < model.grid.size(); ++flat) {
                const int u = model.m2_table[flat];
                for (int r = 0; r < 3; ++r) {
                    const Cplx gr = grad_hat[r][flat];
                    al.h0[flat] -= ic[u](i, r) * gr;
                    al.h1[flat] += is_over_w[u](i, r) * gr;
                    be.h0[flat] -= is_times_w[u](i, r) * gr;
                    be.h1[flat] -= ic[u](i, r) * gr;
                }
            }
        }
    }
    return out;
}

double theta_inner_factor(const PreparedModel& model, int n, int i,
                          const TestFunctional& z, double s) {
    // <W_n(s) (0, grad_i rho_n), psi_n> in spectral form
    const auto& g = model.profiles[n].grad_rho_hat[i];
    ComplexField psi0 = model.engine->forward(z.psi0[n]);
    ComplexField psi1 = model.engine->forward(z.psi1[n]);
    const auto& w = model.omega_n[n];
    double acc = 0.0;
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
        Cplx a{0.0, 0.0}, b = g[flat];
        mode_rotate(w[flat], s, a, b);
        acc += (a * std::conj(psi0[flat]) + b * std::conj(psi1[flat])).real();
    }
    return acc / model.grid.volume();
}

std::vector<std::vector<PairHat>> build_theta(const PreparedModel& model,
                                              const ScatteringProfiles& profiles,
                                              const TestFunctional& z) {
    const long long m = std::llround(profiles.s_max / profiles.ds);
    const double ds = profiles.ds;
    const int d = model.d();
    const int max_m2 = model.grid.max_m2();
    const double inv_vol = 1.0 / model.grid.volume();

    std::vector<std::vector<PairHat>> theta(d);

    // scalar factors f_in(s_j) via shell sums of the transported source
    // against psi_n
    std::vector<std::vector<std::vector<double>>> f(
        d, std::vector<std::vector<double>>(3, std::vector<double>(m + 1, 0.0)));
    for (int n = 0; n < d; ++n) {
        ComplexField psi0 = model.engine->forward(z.psi0[n]);
        ComplexField psi1 = model.engine->forward(z.psi1[n]);
        const double mass = model.mass(n);
        for (int i = 0; i < 3; ++i) {
            const auto& g = model.profiles[n].grad_rho_hat[i];
            // shell-accumulated pairings
            std::vector<double> c0(max_m2 + 1, 0.0), c1(max_m2 + 1, 0.0);
            for (std::size_t flat = 0; flat < g.size(); ++flat) {
                const int u = model.m2_table[flat];
                c0[u] += (g[flat] * std::conj(psi0[flat])).real();
                c1[u] += (g[flat] * std::conj(psi1[flat])).real();
            }
            const ShellTable& shells = model.shells[n];
            auto& fi = f[n][i];
            for (int u = 0; u <= max_m2; ++u) {
                if (c0[u] == 0.0 && c1[u] == 0.0) continue;
                const double w = std::sqrt(shells.k2_of(u) + mass * mass);
                const double cs = std::cos(w * ds), sn = std::sin(w * ds);
                double cj = 1.0, sj = 0.0;
                for (long long j = 0; j <= m; ++j) {
                    const double sw = w > 0.0 ? sj / w : j * ds;
                    fi[j] += (sw * c0[u] + cj * c1[u]) * inv_vol;
                    const double c2 = cj * cs - sj * sn;
                    sj = sj * cs + cj * sn;
                    cj = c2;
                }
            }
        }
    }

    for (int c = 0; c < d; ++c) {
        theta[c].resize(d);
        const ShellTable& shells = model.shells[c];
        const double mass = model.mass(c);
        for (int n = 0; n < d; ++n) {
            PairHat& th = theta[c][n];
            th.h0 = make_complex_field(model.grid);
            th.h1 = make_complex_field(model.grid);
            for (int i = 0; i < 3; ++i) {
                // per-shell integrals of f_in(s) cos(w s), f_in(s) sin(w s), f_in(s) s
                std::vector<double> C(max_m2 + 1, 0.0), S(max_m2 + 1, 0.0),
                    T(max_m2 + 1, 0.0);
                const auto& fi = f[n][i];
                for (int u = 0; u <= max_m2; ++u) {
                    if (u != 0 &&
                        !std::binary_search(shells.occupied.begin(), shells.occupied.end(), u))
                        continue;
                    const double w = std::sqrt(shells.k2_of(u) + mass * mass);
                    const double cs = std::cos(w * ds), sn = std::sin(w * ds);
                    double cj = 1.0, sj = 0.0;
                    double accC = 0.0, accS = 0.0, accT = 0.0;
                    for (long long j = 0; j <= m; ++j) {
                        const double wj = trap_w(j, m) * ds;
                        accC += wj * cj * fi[j];
                        accS += wj * sj * fi[j];
                        accT += wj * (j * ds) * fi[j];
                        const double c2 = cj * cs - sj * sn;
                        sj = sj * cs + cj * sn;
                        cj = c2;
                    }
                    C[u] = accC;
                    S[u] = accS;
                    T[u] = accT;
                }
                const PairHat& al = profiles.alpha[c][i];
                for (std::size_t flat = 0; flat < model.grid.size(); ++flat) {
                    const int u = model.m2_table[flat];
                    const double w = std::sqrt(shells.k2_of(u) + mass * mass);
                    if (w > 0.0) {
                        th.h0[flat] += al.h0[flat] * C[u] + w * al.h1[flat] * S[u];
                        th.h1[flat] += -al.h0[flat] * S[u] / w + al.h1[flat] * C[u];
                    } else {
                        th.h0[flat] += al.h0[flat] * C[u];
                        th.h1[flat] += al.h1[flat] * C[u] - al.h0[flat] * T[u];
                    }
                }
            }
        }
    }
    return theta;
}

TestFunctional build_psi_z(const PreparedModel& model, const ScatteringProfiles& profiles,
                           const TestFunctional& z) {
    auto theta = build_theta(model, profiles, z);
    TestFunctional out = zero_functional(model);
    for (int c = 0; c < model.d(); ++c) {
        ComplexField h0 = model.engine->forward(z.psi0[c]);
        ComplexField h1 = model.engine->forward(z.psi1[c]);
        for (int n = 0; n < model.d(); ++n)
            for (std::size_t flat = 0; flat < h0.size(); ++flat) {
                h0[flat] -= theta[c][n].h0[flat];
                h1[flat] -= theta[c][n].h1[flat];
            }
        for (int i = 0; i < 3; ++i)
            for (std::size_t flat = 0; flat < h0.size(); ++flat) {
                h0[flat] += profiles.alpha[c][i].h0[flat] * z.u[i] +
                            profiles.beta[c][i].h0[flat] * z.v[i];
                h1[flat] += profiles.alpha[c][i].h1[flat] * z.u[i] +
                            profiles.beta[c][i].h1[flat] * z.v[i];
            }
        out.psi0[c] = model.engine->inverse(h0);
        out.psi1[c] = model.engine->inverse(h1);
    }
    return out;
}

TestFunctional free_adjoint_flow(const PreparedModel& model, const TestFunctional& psi,
                                 double t) {
    TestFunctional out = zero_functional(model);
    for (int n = 0; n < model.d(); ++n) {
        ComplexField a = model.engine->forward(psi.psi0[n]);
        ComplexField b = model.engine->forward(psi.psi1[n]);
        const auto& w = model.omega_n[n];
        for (std::size_t flat = 0; flat < a.size(); ++flat)
            mode_rotate_adjoint(w[flat], t, a[flat], b[flat]);
        out.psi0[n] = model.engine->inverse(a);
        out.psi1[n] = model.engine->inverse(b);
    }
    return out;
}

double residual_second_moment(const PreparedModel& model, const SpectralDensity& density,
                              const Mat6& particle_cov, const TestFunctional& z,
                              const TestFunctional& psi_z, double t, double dt) {
    TestFunctional pulled = adjoint_pullback(model, z, t, dt);
    TestFunctional free_part = free_adjoint_flow(model, psi_z, t);
    TestFunctional a = pulled;  // keeps the particle slots of U'(t) Z
    for (int n = 0; n < model.d(); ++n) {
        for (std::size_t i = 0; i < a.psi0[n].size(); ++i) {
            a.psi0[n][i] -= free_part.psi0[n][i];
            a.psi1[n][i] -= free_part.psi1[n][i];
        }
    }
    return covariance_form(density, particle_cov, model, a, a);
}

}  // namespace kgp
