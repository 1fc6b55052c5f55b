#include "kgp/measures.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

namespace kgp {

namespace {

double smooth_bump(double r, double radius, double amplitude) {
    if (r >= radius) return 0.0;
    double s = r / radius;
    return amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s));
}

// 2x2 free-flow matrix of one mode
void mode_matrix(double w, double t, double out[2][2]) {
    if (w > 0.0) {
        double c = std::cos(w * t), s = std::sin(w * t);
        out[0][0] = c;
        out[0][1] = s / w;
        out[1][0] = -w * s;
        out[1][1] = c;
    } else {
        out[0][0] = 1.0;
        out[0][1] = t;
        out[1][0] = 0.0;
        out[1][1] = 1.0;
    }
}

void run_parallel(int threads, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min<int>(threads, 64));
    if (threads == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

double spectral_pairing(const GridSpec& grid, const SpectralState& y, const SpectralState& z) {
    double s = 0.0;
    for (std::size_t n = 0; n < y.phi.size(); ++n) {
        s += inner_k(grid, y.phi[n], z.phi[n]);
        s += inner_k(grid, y.pi[n], z.pi[n]);
    }
    return s + y.q.dot(z.q) + y.p.dot(z.p);
}

Mat6 psd_sqrt(const Mat6& m) {
    Eigen::SelfAdjointEigenSolver<Mat6> es(m);
    Vec6 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

CovarianceSpec CovarianceSpec::simple(int d, double c00v, double c11v, double c01v,
                                      double chi_radius, double sigma_q, double sigma_p) {
    CovarianceSpec s;
    s.chi_radius = chi_radius;
    s.c00 = c00v * Eigen::MatrixXd::Identity(d, d);
    s.c11 = c11v * Eigen::MatrixXd::Identity(d, d);
    s.c01 = c01v * Eigen::MatrixXd::Identity(d, d);
    s.c10 = c01v * Eigen::MatrixXd::Identity(d, d);
    s.particle_cov = Mat6::Zero();
    s.particle_cov.topLeftCorner<3, 3>() = sigma_q * sigma_q * Mat3::Identity();
    s.particle_cov.bottomRightCorner<3, 3>() = sigma_p * sigma_p * Mat3::Identity();
    return s;
}

std::vector<std::string> CovarianceSpec::validate(int d, double box_length) const {
    std::vector<std::string> errs;
    if (!(chi_radius > 0.0)) errs.push_back("covariance: chi_radius must be > 0");
    if (2.0 * chi_radius >= 0.5 * box_length)
        errs.push_back("covariance: correlation support 2*chi_radius must be < L/2");
    auto check_dim = [&](const Eigen::MatrixXd& m, const char* name) {
        if (m.rows() != d || m.cols() != d)
            errs.push_back(std::string("covariance: ") + name + " must be d x d");
    };
    check_dim(c00, "c00");
    check_dim(c01, "c01");
    check_dim(c10, "c10");
    check_dim(c11, "c11");
    if (errs.empty()) {
        if (!c00.isApprox(c00.transpose(), 1e-12)) errs.push_back("covariance: c00 must be symmetric");
        if (!c11.isApprox(c11.transpose(), 1e-12)) errs.push_back("covariance: c11 must be symmetric");
        if (!c10.isApprox(c01.transpose(), 1e-12))
            errs.push_back("covariance: c10 must equal c01 transposed");
    }
    if (!particle_cov.isApprox(particle_cov.transpose(), 1e-12))
        errs.push_back("covariance: particle_cov must be symmetric");
    return errs;
}

SpectralDensity assemble_spectral_density(const CovarianceSpec& spec,
                                          const PreparedModel& model) {
    auto errs = spec.validate(model.d(), model.grid.box_length);
    if (!errs.empty()) {
        std::string joined = "assemble_spectral_density:";
        for (const auto& e : errs) joined += "\n  - " + e;
        throw std::invalid_argument(joined);
    }
    const GridSpec& g = model.grid;
    RealField chi = make_real_field(g);
    for_each_cell(g, [&](std::size_t flat, int i, int j, int k) {
        chi[flat] = smooth_bump(g.x_at(i, j, k).norm(), spec.chi_radius, spec.chi_amplitude);
    });
    ComplexField chi_hat = model.engine->forward(chi);

    const int d = model.d();
    SpectralDensity density;
    density.d = d;
    density.grid = g;
    density.M.resize(g.size());
    double min_eig = std::numeric_limits<double>::infinity();
    std::size_t worst = 0;
    for (std::size_t flat = 0; flat < g.size(); ++flat) {
        const double gk = std::norm(chi_hat[flat]);  // |chi_hat|^2 >= 0
        Eigen::MatrixXcd m(2 * d, 2 * d);
        for (int n = 0; n < d; ++n)
            for (int np = 0; np < d; ++np) {
                m(n, np) = spec.c00(n, np) * gk;
                m(n, d + np) = spec.c01(n, np) * gk;
                m(d + n, np) = spec.c10(n, np) * gk;
                m(d + n, d + np) = spec.c11(n, np) * gk;
            }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
        double lo = es.eigenvalues().minCoeff();
        if (lo < min_eig) {
            min_eig = lo;
            worst = flat;
        }
        density.M[flat] = std::move(m);
    }
    density.min_eigenvalue = min_eig;
    const double tol = 1e-12 * std::max(1.0, std::abs(density.M[0].trace().real()));
    if (min_eig < -tol) {
        std::ostringstream msg;
        msg << "assemble_spectral_density: density not PSD, eigenvalue " << min_eig
            << " at flat mode " << worst;
        throw std::runtime_error(msg.str());
    }
    return density;
}

LimitCovariance limit_covariance(const SpectralDensity& density, const PreparedModel& model) {
    const int d = density.d;
    LimitCovariance out;
    out.blocks.d = d;
    out.blocks.grid = density.grid;
    out.blocks.M.resize(density.M.size());
    for (std::size_t flat = 0; flat < density.M.size(); ++flat) {
        const Eigen::MatrixXcd& m = density.M[flat];
        Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(2 * d, 2 * d);
        for (int n = 0; n < d; ++n)
            for (int np = 0; np < d; ++np) {
                if (model.mass(n) != model.mass(np)) continue;  // chi_{nn'} = 0
                const double w = model.omega_n[n][flat];
                const double w2 = w * w;
                const double e_mult = w2 > 0.0 ? 1.0 / w2 : 0.0;  // zero-mode convention
                const Cplx b00 = m(n, np), b01 = m(n, d + np);
                const Cplx b10 = m(d + n, np), b11 = m(d + n, d + np);
                r(n, np) = 0.5 * (b00 + b11 * e_mult);
                r(n, d + np) = 0.5 * (b01 - b10);
                r(d + n, np) = -r(n, d + np);
                r(d + n, d + np) = 0.5 * (b11 + w2 * b00);
            }
        out.blocks.M[flat] = std::move(r);
    }
    double min_eig = std::numeric_limits<double>::infinity();
    for (const auto& m : out.blocks.M) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    out.blocks.min_eigenvalue = min_eig;
    return out;
}

SpectralDensity free_flow_transport(const SpectralDensity& density,
                                    const PreparedModel& model, double t) {
    const int d = density.d;
    SpectralDensity out;
    out.d = d;
    out.grid = density.grid;
    out.M.resize(density.M.size());
    for (std::size_t flat = 0; flat < density.M.size(); ++flat) {
        Eigen::MatrixXd rot = Eigen::MatrixXd::Zero(2 * d, 2 * d);
        for (int n = 0; n < d; ++n) {
            double r[2][2];
            mode_matrix(model.omega_n[n][flat], t, r);
            rot(n, n) = r[0][0];
            rot(n, d + n) = r[0][1];
            rot(d + n, n) = r[1][0];
            rot(d + n, d + n) = r[1][1];
        }
        out.M[flat] = rot * density.M[flat] * rot.transpose();
    }
    out.min_eigenvalue = density.min_eigenvalue;
    return out;
}

double field_covariance_form(const SpectralDensity& density, const SpectralState& a,
                             const SpectralState& b) {
    const int d = density.d;
    Cplx total{0.0, 0.0};
    Eigen::VectorXcd va(2 * d), vb(2 * d);
    for (std::size_t flat = 0; flat < density.M.size(); ++flat) {
        for (int n = 0; n < d; ++n) {
            va(n) = a.phi[n][flat];
            va(d + n) = a.pi[n][flat];
            vb(n) = b.phi[n][flat];
            vb(d + n) = b.pi[n][flat];
        }
        total += va.dot(density.M[flat] * vb);  // Eigen dot conjugates the left side
    }
    return total.real() / density.grid.volume();
}

double covariance_form(const SpectralDensity& density, const Mat6& particle_cov,
                       const SpectralState& a, const SpectralState& b) {
    Vec6 pa, pb;
    pa << a.q, a.p;
    pb << b.q, b.p;
    return field_covariance_form(density, a, b) + pa.dot(particle_cov * pb);
}

double covariance_form(const SpectralDensity& density, const Mat6& particle_cov,
                       const PreparedModel& model, const TestFunctional& a,
                       const TestFunctional& b) {
    return covariance_form(density, particle_cov, to_spectral(model, a), to_spectral(model, b));
}

double quadratic_form_limit(const LimitCovariance& limit, const PreparedModel& model,
                            const TestFunctional& psi_a, const TestFunctional& psi_b) {
    return field_covariance_form(limit.blocks, to_spectral(model, psi_a),
                                 to_spectral(model, psi_b));
}

double q_infinity(const LimitCovariance& limit, const PreparedModel& model,
                  const TestFunctional& psi_z) {
    return quadratic_form_limit(limit, model, psi_z, psi_z);
}

double exact_qt(const PreparedModel& model, const SpectralDensity& density,
                const Mat6& particle_cov, const TestFunctional& z1,
                const TestFunctional& z2, double t, double dt) {
    TestFunctional a = adjoint_pullback(model, z1, t, dt);
    TestFunctional b = adjoint_pullback(model, z2, t, dt);
    return covariance_form(density, particle_cov, model, a, b);
}

std::vector<std::vector<double>> exact_qt_table(const PreparedModel& model,
                                                const SpectralDensity& density,
                                                const Mat6& particle_cov,
                                                const std::vector<TestFunctional>& zs,
                                                const std::vector<double>& t_list,
                                                double dt) {
    std::vector<std::vector<double>> out(zs.size(),
                                         std::vector<double>(t_list.size(), 0.0));
    for (std::size_t zi = 0; zi < zs.size(); ++zi) {
        auto pulled = adjoint_pullback_multi(model, zs[zi], t_list, dt);
        for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
            SpectralState s = to_spectral(model, pulled[ti]);
            out[zi][ti] = covariance_form(density, particle_cov, s, s);
        }
    }
    return out;
}

uint64_t derive_seed(uint64_t base, uint64_t index) {
    uint64_t x = base + (index + 1) * 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

GaussianSampler::GaussianSampler(const SpectralDensity& density, const Mat6& particle_cov,
                                 const PreparedModel& model)
    : model_(model), d_(density.d) {
    factor_.resize(density.M.size());
    for (std::size_t flat = 0; flat < density.M.size(); ++flat) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(density.M[flat]);
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        factor_[flat] = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    }
    particle_factor_ = psd_sqrt(particle_cov);
}

SpectralState GaussianSampler::sample_spectral(uint64_t seed) const {
    const GridSpec& g = model_.grid;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SpectralState s;
    s.phi.assign(d_, make_complex_field(g));
    s.pi.assign(d_, make_complex_field(g));
    const double scale = std::sqrt(g.volume());
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Eigen::VectorXcd xi(2 * d_), val(2 * d_);

    for_each_cell(g, [&](std::size_t flat, int i, int j, int k) {
        const int n = g.n;
        const std::size_t partner = g.index((n - i) % n, (n - j) % n, (n - k) % n);
        if (partner < flat) return;  // filled by its conjugate partner
        if (partner == flat) {
            for (int c = 0; c < 2 * d_; ++c) xi(c) = normal(rng);
            val = scale * (factor_[flat] * xi);
            for (int c = 0; c < d_; ++c) {
                s.phi[c][flat] = Cplx{val(c).real(), 0.0};
                s.pi[c][flat] = Cplx{val(d_ + c).real(), 0.0};
            }
        } else {
            for (int c = 0; c < 2 * d_; ++c)
                xi(c) = Cplx{normal(rng), normal(rng)} * inv_sqrt2;
            val = scale * (factor_[flat] * xi);
            for (int c = 0; c < d_; ++c) {
                s.phi[c][flat] = val(c);
                s.pi[c][flat] = val(d_ + c);
                s.phi[c][partner] = std::conj(val(c));
                s.pi[c][partner] = std::conj(val(d_ + c));
            }
        }
    });

    Vec6 xi6;
    for (int c = 0; c < 6; ++c) xi6(c) = normal(rng);
    Vec6 particle = particle_factor_ * xi6;
    s.q = particle.head<3>();
    s.p = particle.tail<3>();
    return s;
}

FullState GaussianSampler::sample_state(uint64_t seed) const {
    return to_physical(model_, sample_spectral(seed));
}

FullState sample_initial(const CovarianceSpec& spec, const PreparedModel& model,
                         uint64_t seed) {
    SpectralDensity density = assemble_spectral_density(spec, model);
    GaussianSampler sampler(density, spec.particle_cov, model);
    return sampler.sample_state(seed);
}

EnsembleStats ensemble_run(const PreparedModel& model, const CovarianceSpec& spec,
                           const std::vector<std::pair<std::string, TestFunctional>>& zs,
                           const EnsembleOptions& opts) {
    if (opts.sample_count < 100)
        throw std::invalid_argument("ensemble_run: sample_count must be >= 100");
    SpectralDensity density = assemble_spectral_density(spec, model);
    GaussianSampler sampler(density, spec.particle_cov, model);

    const std::size_t nz = zs.size(), nt = opts.t_list.size();
    // pulled-back functionals, spectral form
    std::vector<std::vector<SpectralState>> pulled(nz);
    for (std::size_t zi = 0; zi < nz; ++zi) {
        auto fs = adjoint_pullback_multi(model, zs[zi].second, opts.t_list, opts.dt);
        for (auto& f : fs) pulled[zi].push_back(to_spectral(model, f));
    }

    // per-sample pairings <Y0, U'(t) Z>
    const std::size_t m_count = static_cast<std::size_t>(opts.sample_count);
    std::vector<std::vector<std::vector<double>>> vals(
        nz, std::vector<std::vector<double>>(nt, std::vector<double>(m_count, 0.0)));
    run_parallel(opts.threads, m_count, [&](std::size_t m) {
        SpectralState y = sampler.sample_spectral(derive_seed(opts.base_seed, m));
        for (std::size_t zi = 0; zi < nz; ++zi)
            for (std::size_t ti = 0; ti < nt; ++ti)
                vals[zi][ti][m] = spectral_pairing(model.grid, y, pulled[zi][ti]);
    });

    EnsembleStats stats;
    stats.t_list = opts.t_list;
    stats.sample_count = opts.sample_count;
    stats.base_seed = opts.base_seed;
    const double inv_m = 1.0 / static_cast<double>(m_count);
    for (std::size_t zi = 0; zi < nz; ++zi) {
        FunctionalStats fs;
        fs.name = zs[zi].first;
        for (std::size_t ti = 0; ti < nt; ++ti) {
            const auto& v = vals[zi][ti];
            double mean = 0.0, q = 0.0;
            Cplx ch{0.0, 0.0};
            for (double x : v) {
                mean += x;
                q += x * x;
                ch += Cplx{std::cos(x), std::sin(x)};
            }
            mean *= inv_m;
            q *= inv_m;
            ch *= inv_m;
            double var_mean = 0.0, var_q = 0.0, var_ch = 0.0;
            for (double x : v) {
                var_mean += (x - mean) * (x - mean);
                var_q += (x * x - q) * (x * x - q);
                var_ch += std::norm(Cplx{std::cos(x), std::sin(x)} - ch);
            }
            // jackknife standard error of a sample mean
            const double denom = static_cast<double>(m_count) * (m_count - 1);
            fs.mean.push_back(mean);
            fs.mean_se.push_back(std::sqrt(var_mean / denom));
            fs.empirical_qt.push_back(q);
            fs.qt_se.push_back(std::sqrt(var_q / denom));
            fs.char_empirical.push_back(ch);
            fs.char_se.push_back(std::sqrt(var_ch / denom));
            const SpectralState& zt = pulled[zi][ti];
            double eq = covariance_form(density, spec.particle_cov, zt, zt);
            fs.exact_qt.push_back(eq);
            fs.char_exact.push_back(std::exp(-0.5 * eq));
        }
        stats.functionals.push_back(std::move(fs));
    }

    // uniform moment sanity check on an evolved subset
    if (opts.trajectory_samples > 0 && nt > 0) {
        std::vector<double> sums(nt, 0.0);
        for (int m = 0; m < opts.trajectory_samples; ++m) {
            SpectralState y =
                sampler.sample_spectral(derive_seed(opts.base_seed, 0x10000000ULL + m));
            long long step = 0;
            for (std::size_t ti = 0; ti < nt; ++ti) {
                long long mark = std::llround(opts.t_list[ti] / opts.dt);
                for (; step < mark; ++step) strang_step(model, y, opts.dt);
                double norm = local_state_norm(model, to_physical(model, y), opts.moment_radius);
                sums[ti] += norm * norm;
            }
        }
        for (double s : sums) stats.moment_mean.push_back(s / opts.trajectory_samples);
        double avg = 0.0, mx = 0.0;
        for (double s : stats.moment_mean) {
            avg += s;
            mx = std::max(mx, s);
        }
        avg /= stats.moment_mean.size();
        stats.moment_max_over_avg = avg > 0.0 ? mx / avg : 0.0;
    }
    return stats;
}

}  // namespace kgp
