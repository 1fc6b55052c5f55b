// Translation-invariant Gaussian initial measures and their statistics:
// assembly of the per-mode spectral density, the flow-averaged limit
// covariance, exact second moments through the adjoint pullback, Gaussian
// sampling, and Monte Carlo ensemble estimates with jackknife errors.
#pragma once

#include "kgp/dynamics.hpp"

#include <random>

namespace kgp {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Initial correlations q0^{ij}_{nn'}(z) = c^{ij}_{nn'} g(z), with the base
// correlation g = chi (*) chi for a smooth bump chi (so g has compact support
// and a nonnegative transform by construction), plus an independent Gaussian
// (q0, p0) with the given 6x6 covariance.
struct CovarianceSpec {
    double chi_radius = 2.0;     // support radius of chi; supp g = 2 * chi_radius
    double chi_amplitude = 1.0;
    Eigen::MatrixXd c00, c01, c10, c11;  // d x d coefficient blocks
    Mat6 particle_cov = Mat6::Identity();

    static CovarianceSpec simple(int d, double c00v, double c11v, double c01v,
                                 double chi_radius, double sigma_q, double sigma_p);
    std::vector<std::string> validate(int d, double box_length) const;
};

// Per-mode 2d x 2d Hermitian matrices M(k); row/col index is slot*d + n with
// slot 0 pairing phi and slot 1 pairing pi.
struct SpectralDensity {
    int d = 0;
    GridSpec grid;
    std::vector<Eigen::MatrixXcd> M;
    double min_eigenvalue = 0.0;
};

// Builds M(k) and verifies it is Hermitian PSD at every lattice mode; throws
// listing the worst mode otherwise.
SpectralDensity assemble_spectral_density(const CovarianceSpec& spec,
                                          const PreparedModel& model);

struct LimitCovariance {
    SpectralDensity blocks;
};

// Flow-average of the density: per mode and component pair (equal-mass pairs
// only), the rotation-invariant part of the covariance.  The massless zero
// mode uses the documented zero multiplier for the 1/(k^2+m^2) convolution.
LimitCovariance limit_covariance(const SpectralDensity& density, const PreparedModel& model);

// Push the density through the free field flow for time t.
SpectralDensity free_flow_transport(const SpectralDensity& density,
                                    const PreparedModel& model, double t);

// --- quadratic forms ---------------------------------------------------------

// Field part of E <Y0,A><Y0,B> for the given density (no particle part).
double field_covariance_form(const SpectralDensity& density, const SpectralState& a,
                             const SpectralState& b);

// Full C0(A, B) = field part + particle part.
double covariance_form(const SpectralDensity& density, const Mat6& particle_cov,
                       const SpectralState& a, const SpectralState& b);
double covariance_form(const SpectralDensity& density, const Mat6& particle_cov,
                       const PreparedModel& model, const TestFunctional& a,
                       const TestFunctional& b);

// Q^nu_inf(psiA, psiB): the limit form on field test pairs.
double quadratic_form_limit(const LimitCovariance& limit, const PreparedModel& model,
                            const TestFunctional& psi_a, const TestFunctional& psi_b);

// Q_inf(Z, Z) = Q^nu_inf(psi_z, psi_z) for a scattering image psi_z.
double q_infinity(const LimitCovariance& limit, const PreparedModel& model,
                  const TestFunctional& psi_z);

// E <Y(t),Z1><Y(t),Z2> computed exactly as C0(U'(t) Z1, U'(t) Z2).
double exact_qt(const PreparedModel& model, const SpectralDensity& density,
                const Mat6& particle_cov, const TestFunctional& z1,
                const TestFunctional& z2, double t, double dt);

// Diagonal values E <Y(t),Z>^2 for each Z and each t in one pullback pass.
std::vector<std::vector<double>> exact_qt_table(const PreparedModel& model,
                                                const SpectralDensity& density,
                                                const Mat6& particle_cov,
                                                const std::vector<TestFunctional>& zs,
                                                const std::vector<double>& t_list,
                                                double dt);

// --- sampling ----------------------------------------------------------------

uint64_t derive_seed(uint64_t base, uint64_t index);

// Precomputed per-mode square roots of M(k) plus the particle factor.
class GaussianSampler {
public:
    GaussianSampler(const SpectralDensity& density, const Mat6& particle_cov,
                    const PreparedModel& model);

    // Spectral-domain draw (Hermitian symmetry enforced); bit-reproducible per seed.
    SpectralState sample_spectral(uint64_t seed) const;
    // Same draw realized on the grid.
    FullState sample_state(uint64_t seed) const;

private:
    const PreparedModel& model_;
    int d_;
    std::vector<Eigen::MatrixXcd> factor_;  // M(k)^{1/2}
    Mat6 particle_factor_;
};

FullState sample_initial(const CovarianceSpec& spec, const PreparedModel& model,
                         uint64_t seed);

// --- ensemble statistics -----------------------------------------------------

struct EnsembleOptions {
    int sample_count = 2000;
    int trajectory_samples = 0;  // states evolved for the moment sanity check
    double dt = 0.01;
    std::vector<double> t_list;
    uint64_t base_seed = 1;
    double moment_radius = 2.0;
    int threads = 0;  // 0 = machine default
};

struct FunctionalStats {
    std::string name;
    // per t in t_list:
    std::vector<double> empirical_qt, exact_qt, qt_se;
    std::vector<Cplx> char_empirical;
    std::vector<double> char_se, char_exact;
    std::vector<double> mean, mean_se;
};

struct EnsembleStats {
    std::vector<double> t_list;
    std::vector<FunctionalStats> functionals;
    std::vector<double> moment_mean;  // mean ||Y(t)||^2_{E,R} over the trajectory subset
    double moment_max_over_avg = 0.0;
    int sample_count = 0;
    uint64_t base_seed = 0;
};

EnsembleStats ensemble_run(const PreparedModel& model, const CovarianceSpec& spec,
                           const std::vector<std::pair<std::string, TestFunctional>>& zs,
                           const EnsembleOptions& opts);

}  // namespace kgp
