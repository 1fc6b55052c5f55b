// Physical model definition: masses, oscillator frequency, coupling profiles,
// their grid/lattice samplings, and the computable conditions on the coupling
// (positive-definiteness of the shifted coupling matrices, nonvanishing of the
// profile transform).
#pragma once

#include "kgp/grid.hpp"
#include "kgp/spectral.hpp"

#include <memory>
#include <string>
#include <vector>

namespace kgp {

enum class ProfileShape {
    truncated_gaussian,  // gaussian times a smooth compactly supported cutoff
    bspline_bump,        // ball indicator convolved with itself (transform has zeros)
};

struct ProfileSpec {
    double amplitude = 0.0;
    double support_radius = 0.0;  // R_rho; profile vanishes for |x| >= R_rho
    ProfileShape shape = ProfileShape::truncated_gaussian;
    double width = 0.3;  // gaussian width; ignored for bspline_bump
};

// Radial closed form of the profile (exact, grid free).
double profile_value(const ProfileSpec& spec, double r);

// Continuum radial transform rho_hat(r) by direct quadrature of the profile
// closed form (no grid, no aliasing).
double radial_fourier_exact(const ProfileSpec& spec, double r);

// Profile sampled on the grid together with its transform and spectral
// gradients.  grad_rho[a] holds d rho / dx_a.
struct SampledProfile {
    ProfileSpec spec;
    RealField rho;
    ComplexField rho_hat;
    std::array<RealField, 3> grad_rho;
    std::array<ComplexField, 3> grad_rho_hat;
};

SampledProfile build_profile(const ProfileSpec& spec, const GridSpec& grid,
                             const SpectralEngine& engine);

// Semi-analytic radial transform rho_hat(r) = (4 pi / r) int_0^R s sin(rs) rho(s) ds,
// tabulated on a fine radial grid with cubic interpolation between samples.
class RadialProfile {
public:
    RadialProfile(const ProfileSpec& spec, double k_max = 48.0, int table_size = 4096);

    double fourier(double r) const;        // interpolated
    double fourier_exact(double r) const;  // direct quadrature
    double k_max() const { return k_max_; }
    const ProfileSpec& spec() const { return spec_; }

private:
    ProfileSpec spec_;
    double k_max_;
    double dr_;
    std::vector<double> table_;
};

// Lattice moments grouped by shells of constant |k|^2: for integer u = |m|^2,
//   S[u] = sum_{|m|^2 = u} k_i k_j |rho_hat(k)|^2 / L^3.
// Continuum integrals (2pi)^-3 int k_i k_j |rho_hat|^2 f(k^2) dk are then
// sum_u S[u] f(u * k_unit^2).
struct ShellTable {
    double k_unit2 = 0.0;
    std::vector<Mat3> S;           // indexed by u, dense
    std::vector<int> occupied;     // u values with nonzero mode count
    double k2_of(int u) const { return k_unit2 * u; }
};

ShellTable build_shell_table(const SampledProfile& p, const GridSpec& grid);

struct ModelConfig {
    int d = 1;
    std::vector<double> masses;        // size d, each >= 0
    double omega = 1.0;                // > 0
    std::vector<ProfileSpec> profiles; // size d
    double box_length = 16.0;
    int grid_n = 32;
    double dt = 0.01;

    GridSpec grid() const { return GridSpec(box_length, grid_n); }
    // Collects every violated invariant; empty means valid.
    std::vector<std::string> validate() const;
    void validate_or_throw() const;
};

struct ConditionReport {
    Mat3 K = Mat3::Zero();        // shift m_star^2
    Mat3 K0 = Mat3::Zero();       // shift 0
    double m_star = 0.0;
    Vec3 eig_A1 = Vec3::Zero();   // eigenvalues of (omega^2 - m_star^2) I - K
    Vec3 eig_A1p = Vec3::Zero();  // eigenvalues of omega^2 I - K0
    double a3_min_abs = 0.0;      // min over grid k != 0 of min_n |rho_hat_n(k)|
    double a3_threshold = 0.0;
    bool a1_holds = false;
    bool a1p_holds = false;
    bool a3_holds = false;
};

// Model with everything downstream modules need precomputed.
struct PreparedModel {
    ModelConfig config;
    GridSpec grid;
    std::shared_ptr<SpectralEngine> engine;
    std::vector<SampledProfile> profiles;       // d
    std::vector<ShellTable> shells;             // d
    std::vector<std::vector<double>> omega_n;   // d dispersion tables
    std::vector<int> m2_table;                  // |m|^2 per flat index

    static PreparedModel build(const ModelConfig& config);
    int d() const { return config.d; }
    double mass(int n) const { return config.masses[n]; }
};

// K-type matrix at denominator shift s2 (entries sum_n L^-3 sum_k k_i k_j
// |rho_hat_n|^2 / (k^2 + m_n^2 - s2)); throws on a nonpositive denominator at
// an occupied shell.
Mat3 coupling_matrix(const PreparedModel& model, double s2);

double m_star_of(const std::vector<double>& masses);

ConditionReport check_conditions(const PreparedModel& model,
                                 double a3_threshold_factor = 1e-10);

}  // namespace kgp
