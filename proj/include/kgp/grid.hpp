// Periodic cubic grid bookkeeping: cell/wavenumber conventions shared by all
// modules.  Coordinates are wrapped to [-L/2, L/2), wavenumbers are
// k = (2*pi/L)*m with integer m in [-N/2, N/2) per axis (FFT storage order).
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace kgp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Cplx = std::complex<double>;

using RealField = std::vector<double>;
using ComplexField = std::vector<Cplx>;

struct GridSpec {
    double box_length = 0.0;  // L
    int n = 0;                // N, even

    GridSpec() = default;
    GridSpec(double L, int N) : box_length(L), n(N) {
        if (L <= 0.0) throw std::invalid_argument("GridSpec: box_length must be > 0");
        if (N <= 0 || N % 2 != 0) throw std::invalid_argument("GridSpec: grid_n must be even and > 0");
    }

    std::size_t size() const { return static_cast<std::size_t>(n) * n * n; }
    double cell() const { return box_length / n; }
    double cell_volume() const { double h = cell(); return h * h * h; }
    double volume() const { return box_length * box_length * box_length; }
    double k_unit() const { return 2.0 * M_PI / box_length; }
    // largest per-axis wavenumber magnitude (Nyquist)
    double k_nyquist() const { return k_unit() * (n / 2); }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n + j) * n + k;
    }

    // signed lattice integer for axis index i (FFT ordering)
    int signed_mode(int i) const { return i < n / 2 ? i : i - n; }

    // wrapped coordinate of axis index i, in [-L/2, L/2)
    double coord(int i) const { return signed_mode(i) * cell(); }

    double wavenumber(int i) const { return k_unit() * signed_mode(i); }

    Vec3 x_at(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
    Vec3 k_at(int i, int j, int k) const { return {wavenumber(i), wavenumber(j), wavenumber(k)}; }

    // |m|^2 for the mode at (i,j,k); k^2 = k_unit()^2 * m2
    int mode_m2(int i, int j, int k) const {
        int a = signed_mode(i), b = signed_mode(j), c = signed_mode(k);
        return a * a + b * b + c * c;
    }

    int max_m2() const { int half = n / 2; return 3 * half * half; }

    bool operator==(const GridSpec& o) const {
        return box_length == o.box_length && n == o.n;
    }
};

// Loops over all grid indices calling fn(flat, i, j, k).
template <typename F>
void for_each_cell(const GridSpec& g, F&& fn) {
    std::size_t flat = 0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            for (int k = 0; k < g.n; ++k, ++flat) fn(flat, i, j, k);
}

inline RealField make_real_field(const GridSpec& g) { return RealField(g.size(), 0.0); }
inline ComplexField make_complex_field(const GridSpec& g) { return ComplexField(g.size(), Cplx{0.0, 0.0}); }

// L2 pairing of two real grid fields with the cell-volume weight.
inline double inner_x(const GridSpec& g, const RealField& a, const RealField& b) {
    if (a.size() != g.size() || b.size() != g.size())
        throw std::invalid_argument("inner_x: field size does not match grid");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * g.cell_volume();
}

// Same pairing evaluated on spectral coefficients: (1/L^3) sum_k f(k) conj(g(k)).
inline double inner_k(const GridSpec& g, const ComplexField& a, const ComplexField& b) {
    if (a.size() != g.size() || b.size() != g.size())
        throw std::invalid_argument("inner_k: field size does not match grid");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return s / g.volume();
}

}  // namespace kgp
