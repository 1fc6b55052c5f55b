// Laplace-domain machinery for the particle response: the coupling matrix
// H(lambda), D(lambda) = (lambda^2 + omega^2) I - H(lambda), its inverse, the
// time-domain kernel N(t) recovered by Bromwich-line quadrature, boundary
// values Im H(ix+0) on the imaginary axis, and decay-rate fits.
#pragma once

#include "kgp/model.hpp"

#include <complex>

namespace kgp {

using Mat3c = Eigen::Matrix3cd;

// H(lambda) as the lattice sum  sum_n L^-3 sum_k k_i k_j |rho_hat_n(k)|^2 /
// (k^2 + m_n^2 + lambda^2); throws when a denominator comes within
// `floor` of zero at an occupied shell.
Mat3c h_lattice(const PreparedModel& model, Cplx lambda, double floor = 1e-9);

Mat3c d_matrix(const PreparedModel& model, Cplx lambda);

// D(lambda)^{-1}; throws when cond(D) exceeds 1e12.
Mat3c n_tilde(const PreparedModel& model, Cplx lambda);

struct ContourParams {
    double sigma = 0.1;      // Bromwich abscissa, > 0
    double dx = 5e-3;        // trapezoid spacing along the line
    double x_max = 60.0;     // truncation of |Im lambda|
    double tail_tol = 1e-7;  // bound on the estimated truncation tail
};

struct ResolventTable {
    std::vector<Cplx> lambda;
    std::vector<Mat3c> H, D, Ntilde;
    ContourParams contour;
};

// Samples H, D, Ntilde along the vertical line Re lambda = sigma.
ResolventTable sample_contour(const PreparedModel& model, const ContourParams& params);

struct ResponseKernel {
    std::vector<double> t;
    std::vector<Mat3> N, Ndot;
    double max_imag_residue = 0.0;  // largest |Im| discarded after the check
    ContourParams contour;
};

// Evaluates N(t) = (2 pi i)^{-1} int e^{lambda t} Ntilde(lambda) dlambda on
// the Bromwich line by trapezoidal quadrature.  The decoupled kernel
// I/(lambda^2+omega^2) is inverted in closed form (sin(omega t)/omega) and
// only the coupling correction, which decays like |lambda|^{-6}, is
// integrated numerically; Ndot deflates with cos(omega t) likewise.
ResponseKernel inverse_laplace_kernel(const PreparedModel& model,
                                      const std::vector<double>& t_grid,
                                      const ContourParams& params);

std::vector<RadialProfile> build_radial_profiles(const ModelConfig& config,
                                                 double k_max = 48.0);

// v . Im H(ix+0) v by the boundary-value surface integral over the spheres
// |k| = sqrt(x^2 - m_n^2) (components with m_n < |x| only), using a
// fixed-order angular rule and the radial profile transform.
double plemelj_im_h(const ModelConfig& config, const std::vector<RadialProfile>& radials,
                    double x, const Vec3& v, int angular_order = 26);

// Radial-quadrature evaluation of v.H(lambda)v / |v|^2 for radial profiles
// (independent of the lattice; used for limiting absorption).
Cplx h_radial(const ModelConfig& config, const std::vector<RadialProfile>& radials,
              Cplx lambda);

// Im v.H(ix+0)v via the limiting absorption route: evaluate at ix + eps for
// each eps (descending) and Richardson-extrapolate linearly to eps = 0.
double plemelj_im_h_limiting(const ModelConfig& config,
                             const std::vector<RadialProfile>& radials, double x,
                             const Vec3& v, const std::vector<double>& epsilons);

enum class DecayKind { exponential, power };

struct DecayFit {
    DecayKind kind = DecayKind::exponential;
    double rate_or_slope = 0.0;  // decay rate (exponential) or log-log slope (power)
    double t_lo = 0.0, t_hi = 0.0;
    double residual = 0.0;  // rms residual in log space
};

// Least squares of log v against t (exponential) or log t (power) over the
// window [t_lo, t_hi]; requires >= 10 samples, all positive.
DecayFit fit_decay(const std::vector<double>& t, const std::vector<double>& v,
                   DecayKind kind, double t_lo, double t_hi);

}  // namespace kgp
