// Grid field constructors used for initial data and test functionals.
#pragma once

#include "kgp/grid.hpp"

#include <cstdint>

namespace kgp {

// Smooth compactly supported bump a * exp(1 - 1/(1 - (r/R)^2)) centered at
// `center` (wrapped distance), zero for r >= R.
RealField make_bump(const GridSpec& g, const Vec3& center, double radius, double amplitude);

// Plain gaussian a * exp(-r^2 / (2 sigma^2)) (not compactly supported; tails
// below 1e-12 of peak beyond ~7.4 sigma).
RealField make_gaussian(const GridSpec& g, const Vec3& center, double sigma, double amplitude);

void subtract_mean(RealField& f);

// Real random field with spectral support |m|_inf <= max_mode per axis,
// unit-scale coefficients; reproducible per seed.
RealField make_random_band_limited(const GridSpec& g, int max_mode, uint64_t seed,
                                   double amplitude = 1.0);

}  // namespace kgp
