// Asymptotic projection of test functionals onto the free field: the
// response-weighted profiles alpha and beta, the feedback corrections theta,
// the projected functional psi_z, and the exact residual second moment
// E |<Y(t),Z> - <W(t) phi0, psi_z>|^2 through the covariance pullback.
#pragma once

#include "kgp/measures.hpp"
#include "kgp/resolvent.hpp"

namespace kgp {

// Spectral pair (slot pairing phi, slot pairing pi) of one field component.
struct PairHat {
    ComplexField h0, h1;
};

struct ScatteringProfiles {
    double s_max = 0.0;
    double ds = 0.0;
    // alpha[c][i], beta[c][i]: component c, direction i
    std::vector<std::array<PairHat, 3>> alpha, beta;
};

// Time quadrature of the response kernel against the freely transported
// profile gradients, truncated at s_max; requires kernel samples on the
// uniform grid j*ds covering [0, s_max] and s_max < L/2 - max R_rho.
ScatteringProfiles build_alpha_beta(const PreparedModel& model, const ResponseKernel& kernel,
                                    double s_max, double ds);

// Scalar factor <W_n(s) (0, grad_i rho_n), psi_n> of the theta integrand
// (exposed for the sharp-support check in the massless case).
double theta_inner_factor(const PreparedModel& model, int n, int i,
                          const TestFunctional& z, double s);

// theta[c][n] for the field part of Z.
std::vector<std::vector<PairHat>> build_theta(const PreparedModel& model,
                                              const ScatteringProfiles& profiles,
                                              const TestFunctional& z);

// psi_z_c = psi_c - sum_n theta_cn + alpha_c . u + beta_c . v, returned as a
// field-only functional (u = v = 0).
TestFunctional build_psi_z(const PreparedModel& model, const ScatteringProfiles& profiles,
                           const TestFunctional& z);

// Free adjoint flow of a field-only functional (closed form per mode).
TestFunctional free_adjoint_flow(const PreparedModel& model, const TestFunctional& psi,
                                 double t);

// E |<Y(t),Z> - <W(t) phi0, psi_z>|^2 evaluated exactly as C0(A, A) with
// A = U'(t) Z - W'(t) psi_z.
double residual_second_moment(const PreparedModel& model, const SpectralDensity& density,
                              const Mat6& particle_cov, const TestFunctional& z,
                              const TestFunctional& psi_z, double t, double dt);

}  // namespace kgp
