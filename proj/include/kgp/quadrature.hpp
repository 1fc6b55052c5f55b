// Small quadrature helpers used by the radial-profile transforms and the
// limiting-absorption integrals.
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>

namespace kgp {

// Composite Simpson on [a,b] with n subintervals (n made even internally).
template <typename F>
auto simpson(F&& f, double a, double b, int n) -> decltype(f(a)) {
    if (n < 2) n = 2;
    if (n % 2) ++n;
    const double h = (b - a) / n;
    auto s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * (h / 3.0);
}

namespace detail {
template <typename T, typename F>
T adaptive_simpson_rec(F& f, double a, double b, T fa, T fm, T fb, T whole,
                       double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    T flm = f(lm), frm = f(rm);
    T left = (fa + 4.0 * flm + fm) * ((m - a) / 6.0);
    T right = (fm + 4.0 * frm + fb) * ((b - m) / 6.0);
    T delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

// Adaptive Simpson; T is double or std::complex<double>.
template <typename F>
auto adaptive_simpson(F&& f, double a, double b, double tol = 1e-11, int max_depth = 48)
    -> decltype(f(a)) {
    using T = decltype(f(a));
    if (!(b > a)) return T{};
    T fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    T whole = (fa + 4.0 * fm + fb) * ((b - a) / 6.0);
    return detail::adaptive_simpson_rec<T>(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

}  // namespace kgp
