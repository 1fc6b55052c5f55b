#include "kgp/resolvent.hpp"

#include "kgp/quadrature.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace kgp {

Mat3c h_lattice(const PreparedModel& model, Cplx lambda, double floor) {
    Mat3c H = Mat3c::Zero();
    const Cplx l2 = lambda * lambda;
    for (int n = 0; n < model.d(); ++n) {
        const double m2 = model.mass(n) * model.mass(n);
        const ShellTable& t = model.shells[n];
        for (int u : t.occupied) {
            Cplx denom = t.k2_of(u) + m2 + l2;
            if (std::abs(denom) < floor) {
                std::ostringstream msg;
                msg << "h_lattice: denominator " << std::abs(denom) << " below floor " << floor
                    << " at |k|^2 = " << t.k2_of(u) << ", component " << n + 1
                    << ", lambda = (" << lambda.real() << ", " << lambda.imag() << ")";
                throw std::domain_error(msg.str());
            }
            H += t.S[u].cast<Cplx>() / denom;
        }
    }
    return 0.5 * (H + H.transpose().eval());
}

Mat3c d_matrix(const PreparedModel& model, Cplx lambda) {
    const double w2 = model.config.omega * model.config.omega;
    return (lambda * lambda + w2) * Mat3c::Identity() - h_lattice(model, lambda);
}

Mat3c n_tilde(const PreparedModel& model, Cplx lambda) {
    Mat3c D = d_matrix(model, lambda);
    Eigen::JacobiSVD<Mat3c> svd(D);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (!(smin > 0.0) || smax / smin > 1e12) {
        std::ostringstream msg;
        msg << "n_tilde: D(lambda) is singular (cond > 1e12) at lambda = ("
            << lambda.real() << ", " << lambda.imag() << ")";
        throw std::runtime_error(msg.str());
    }
    return D.inverse();
}

ResolventTable sample_contour(const PreparedModel& model, const ContourParams& params) {
    if (!(params.sigma > 0.0)) throw std::invalid_argument("sample_contour: sigma must be > 0");
    ResolventTable table;
    table.contour = params;
    const long long m = std::llround(params.x_max / params.dx);
    table.lambda.reserve(2 * m + 1);
    for (long long j = -m; j <= m; ++j) {
        Cplx lambda{params.sigma, j * params.dx};
        table.lambda.push_back(lambda);
        table.H.push_back(h_lattice(model, lambda));
        table.D.push_back(d_matrix(model, lambda));
        table.Ntilde.push_back(n_tilde(model, lambda));
    }
    return table;
}

ResponseKernel inverse_laplace_kernel(const PreparedModel& model,
                                      const std::vector<double>& t_grid,
                                      const ContourParams& params) {
    if (!(params.sigma > 0.0))
        throw std::invalid_argument("inverse_laplace_kernel: sigma must be > 0");
    const double omega = model.config.omega;
    const double w2 = omega * omega;
    const long long m = std::llround(params.x_max / params.dx);

    // coupling correction Ntilde - free on the upper half line (conjugate
    // symmetry supplies the lower half)
    std::vector<Mat3c> corr(m + 1);
    for (long long j = 0; j <= m; ++j) {
        Cplx lambda{params.sigma, j * params.dx};
        corr[j] = n_tilde(model, lambda) - Mat3c::Identity() / (lambda * lambda + w2);
    }

    const double tail_scale = corr[m].cwiseAbs().maxCoeff();
    const double tail_estimate = tail_scale * params.x_max / 5.0;  // integrand ~ x^-6
    if (tail_estimate > params.tail_tol) {
        std::ostringstream msg;
        msg << "inverse_laplace_kernel: estimated truncation tail " << tail_estimate
            << " exceeds tolerance " << params.tail_tol << "; increase x_max";
        throw std::runtime_error(msg.str());
    }

    ResponseKernel kernel;
    kernel.contour = params;
    kernel.t = t_grid;
    kernel.N.resize(t_grid.size());
    kernel.Ndot.resize(t_grid.size());
    double worst_imag = 0.0;

    for (std::size_t it = 0; it < t_grid.size(); ++it) {
        const double t = t_grid[it];
        Mat3c accN = Mat3c::Zero(), accNd = Mat3c::Zero();
        // full line: j and -j terms, with Ntilde(conj lambda) = conj Ntilde(lambda)
        const Cplx rot = std::exp(Cplx{0.0, params.dx * t});
        Cplx phase{1.0, 0.0};  // e^{i x_j t} at j = 0
        for (long long j = 0; j <= m; ++j) {
            // full-line trapezoid: x=0 is an interior node (weight 1, counted
            // once); the pair at +-x_max carries the endpoint halves
            const double w = (j == m) ? 0.5 : 1.0;
            const Cplx lambda{params.sigma, j * params.dx};
            const Mat3c& B = corr[j];
            if (j == 0) {
                accN += w * phase * B;
                accNd += w * phase * lambda * B;
            } else {
                accN += w * (phase * B + std::conj(phase) * B.conjugate());
                accNd += w * (phase * lambda * B +
                              std::conj(phase) * std::conj(lambda) * B.conjugate());
            }
            phase *= rot;
        }
        const double scale = std::exp(params.sigma * t) * params.dx / (2.0 * M_PI);
        accN *= scale;
        accNd *= scale;
        worst_imag = std::max({worst_imag, accN.imag().cwiseAbs().maxCoeff(),
                               accNd.imag().cwiseAbs().maxCoeff()});
        kernel.N[it] = std::sin(omega * t) / omega * Mat3::Identity() + accN.real();
        kernel.Ndot[it] = std::cos(omega * t) * Mat3::Identity() + accNd.real();
    }
    kernel.max_imag_residue = worst_imag;
    return kernel;
}

std::vector<RadialProfile> build_radial_profiles(const ModelConfig& config, double k_max) {
    std::vector<RadialProfile> out;
    out.reserve(config.profiles.size());
    for (const auto& spec : config.profiles) out.emplace_back(spec, k_max);
    return out;
}

namespace {

struct AngularRule {
    std::vector<Vec3> dirs;
    std::vector<double> weights;  // sum to 1 (average over the sphere)
};

// 26-point octahedral rule (vertices, edge midpoints, face centers of the
// cube), exact through degree 7.
AngularRule angular_rule_26() {
    AngularRule r;
    const double w1 = 1.0 / 21.0, w2 = 4.0 / 105.0, w3 = 27.0 / 840.0;
    for (int a = 0; a < 3; ++a)
        for (int s : {-1, 1}) {
            Vec3 d = Vec3::Zero();
            d[a] = s;
            r.dirs.push_back(d);
            r.weights.push_back(w1);
        }
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int a = 0; a < 3; ++a)
        for (int sa : {-1, 1})
            for (int sb : {-1, 1}) {
                Vec3 d = Vec3::Zero();
                d[a] = sa * inv_sqrt2;
                d[(a + 1) % 3] = sb * inv_sqrt2;
                r.dirs.push_back(d);
                r.weights.push_back(w2);
            }
    const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            for (int sz : {-1, 1}) {
                r.dirs.push_back(Vec3{sx * inv_sqrt3, sy * inv_sqrt3, sz * inv_sqrt3});
                r.weights.push_back(w3);
            }
    return r;
}

constexpr double kBranchGuard = 1e-3;

}  // namespace

double plemelj_im_h(const ModelConfig& config, const std::vector<RadialProfile>& radials,
                    double x, const Vec3& v, int angular_order) {
    if (angular_order != 26)
        throw std::invalid_argument("plemelj_im_h: only the 26-point angular rule is built in");
    for (double mn : config.masses)
        if (std::abs(std::abs(x) - mn) < kBranchGuard) {
            std::ostringstream msg;
            msg << "plemelj_im_h: x = " << x << " within guard band of branch point m = " << mn;
            throw std::domain_error(msg.str());
        }
    const AngularRule rule = angular_rule_26();
    const double pi3 = std::pow(2.0 * M_PI, 3);
    double total = 0.0;
    for (std::size_t n = 0; n < config.masses.size(); ++n) {
        const double mn = config.masses[n];
        if (!(mn < std::abs(x))) continue;  // empty shell
        const double rn = std::sqrt(x * x - mn * mn);
        // int_{|k|=rn} (v.k)^2 |rho_hat|^2 / (2|k|) dS
        double surf = 0.0;
        for (std::size_t a = 0; a < rule.dirs.size(); ++a) {
            const double vk = v.dot(rule.dirs[a]) * rn;
            const double rh = radials[n].fourier(rn);
            surf += rule.weights[a] * vk * vk * rh * rh;
        }
        surf *= 4.0 * M_PI * rn * rn / (2.0 * rn);
        total += surf / pi3;
    }
    return -(x > 0 ? 1.0 : -1.0) * M_PI * total;
}

Cplx h_radial(const ModelConfig& config, const std::vector<RadialProfile>& radials,
              Cplx lambda) {
    Cplx total{0.0, 0.0};
    for (std::size_t n = 0; n < config.masses.size(); ++n) {
        const Cplx b = config.masses[n] * config.masses[n] + lambda * lambda;
        const RadialProfile& rp = radials[n];
        auto integrand = [&](double r) -> Cplx {
            double rh = rp.fourier(r);
            return r * r * r * r * rh * rh / (r * r + b);
        };
        const double k_hi = rp.k_max();
        // split around the near-singular radius when the pole is inside
        double r_star = -1.0;
        if (-b.real() > 0.0) r_star = std::sqrt(-b.real());
        Cplx integral{0.0, 0.0};
        if (r_star > 0.0 && r_star < k_hi) {
            const double pad = std::min(0.5, 0.5 * r_star);
            integral += adaptive_simpson(integrand, 0.0, r_star - pad, 1e-12);
            integral += adaptive_simpson(integrand, r_star - pad, r_star + pad, 1e-13, 52);
            integral += adaptive_simpson(integrand, r_star + pad, k_hi, 1e-12);
        } else {
            integral = adaptive_simpson(integrand, 0.0, k_hi, 1e-12);
        }
        total += integral / (6.0 * M_PI * M_PI);
    }
    return total;
}

double plemelj_im_h_limiting(const ModelConfig& config,
                             const std::vector<RadialProfile>& radials, double x,
                             const Vec3& v, const std::vector<double>& epsilons) {
    if (epsilons.size() < 2)
        throw std::invalid_argument("plemelj_im_h_limiting: need at least two epsilons");
    std::vector<double> vals;
    for (double eps : epsilons)
        vals.push_back(std::imag(h_radial(config, radials, Cplx{eps, x})) * v.squaredNorm());
    // linear Richardson step from the two smallest epsilons
    const double e1 = epsilons[epsilons.size() - 2], e2 = epsilons.back();
    const double v1 = vals[vals.size() - 2], v2 = vals.back();
    return (e1 * v2 - e2 * v1) / (e1 - e2);
}

DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& v,
                   DecayKind kind, double t_lo, double t_hi) {
    if (t.size() != v.size()) throw std::invalid_argument("fit_decay: length mismatch");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        if (!(v[i] > 0.0)) {
            std::ostringstream msg;
            msg << "fit_decay: nonpositive value " << v[i] << " at t = " << t[i];
            throw std::domain_error(msg.str());
        }
        xs.push_back(kind == DecayKind::power ? std::log(t[i]) : t[i]);
        ys.push_back(std::log(v[i]));
    }
    if (xs.size() < 10)
        throw std::invalid_argument("fit_decay: fewer than 10 samples in the fit window");

    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double r = ys[i] - (intercept + slope * xs[i]);
        rss += r * r;
    }
    DecayFit fit;
    fit.kind = kind;
    fit.rate_or_slope = kind == DecayKind::exponential ? -slope : slope;
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    fit.residual = std::sqrt(rss / n);
    return fit;
}

}  // namespace kgp
