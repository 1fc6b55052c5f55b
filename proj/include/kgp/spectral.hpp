// Discrete Fourier transforms of real fields on the periodic box and the
// standard multipliers (derivatives, dispersion, fundamental solution).
//
// Conventions (asserted by the Parseval unit test):
//   forward:  f_hat(k) = h^3 * sum_x f(x) exp(+i k.x)
//   inverse:  f(x)     = L^-3 * sum_k f_hat(k) exp(-i k.x)
// so that sum_x |f|^2 h^3 = L^-3 sum_k |f_hat|^2 and continuum integrals
// (2pi)^-3 int dk map to L^-3 sum_k.
#pragma once

#include "kgp/grid.hpp"

#include <memory>

namespace kgp {

class SpectralEngine {
public:
    explicit SpectralEngine(const GridSpec& grid);
    ~SpectralEngine();
    SpectralEngine(const SpectralEngine&) = delete;
    SpectralEngine& operator=(const SpectralEngine&) = delete;

    const GridSpec& grid() const { return grid_; }

    // Real field -> spectral coefficients (full redundant N^3 storage).
    void forward(const RealField& f, ComplexField& out) const;
    ComplexField forward(const RealField& f) const;

    // Spectral -> real field; returns max |imag| encountered (should be
    // roundoff for Hermitian input).
    double inverse(const ComplexField& f, RealField& out) const;
    RealField inverse(const ComplexField& f) const;

    // Complex-to-complex in the same conventions (used for inverse of
    // non-Hermitian data in tests).
    void forward_c2c(const ComplexField& f, ComplexField& out) const;
    void inverse_c2c(const ComplexField& f, ComplexField& out) const;

    // d/dx_axis as the spectral multiplier -i*k_axis.
    void derivative(const ComplexField& f, int axis, ComplexField& out) const;

    // Not thread safe: transforms share internal scratch buffers.  Use one
    // engine per thread for concurrent work on distinct data.

private:
    GridSpec grid_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

inline double dispersion(double mass, const Vec3& k) {
    return std::sqrt(k.squaredNorm() + mass * mass);
}

// omega_n(k) table over the grid for one component.
std::vector<double> dispersion_table(const GridSpec& g, double mass);

// Multiplier 1/(|k|^2 + m^2); the k = 0 entry is 0 when m = 0 (documented
// zero-mode convention, used consistently by the limit covariance).
std::vector<double> fundamental_multiplier(const GridSpec& g, double mass);

}  // namespace kgp
