#include "kgp/fields.hpp"

#include <cmath>
#include <random>

namespace kgp {

namespace {
double wrapped_dist(const GridSpec& g, const Vec3& x, const Vec3& c) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
        double d = std::remainder(x[a] - c[a], g.box_length);
        s += d * d;
    }
    return std::sqrt(s);
}
}  // namespace

RealField make_bump(const GridSpec& g, const Vec3& center, double radius, double amplitude) {
    RealField f = make_real_field(g);
    for_each_cell(g, [&](std::size_t flat, int i, int j, int k) {
        double r = wrapped_dist(g, g.x_at(i, j, k), center);
        if (r < radius) {
            double s = r / radius;
            f[flat] = amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s));
        }
    });
    return f;
}

RealField make_gaussian(const GridSpec& g, const Vec3& center, double sigma, double amplitude) {
    RealField f = make_real_field(g);
    for_each_cell(g, [&](std::size_t flat, int i, int j, int k) {
        double r = wrapped_dist(g, g.x_at(i, j, k), center);
        f[flat] = amplitude * std::exp(-0.5 * r * r / (sigma * sigma));
    });
    return f;
}

void subtract_mean(RealField& f) {
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= f.size();
    for (double& v : f) v -= mean;
}

RealField make_random_band_limited(const GridSpec& g, int max_mode, uint64_t seed,
                                   double amplitude) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    RealField f = make_real_field(g);
    const double ku = g.k_unit();
    for (int a = -max_mode; a <= max_mode; ++a)
        for (int b = -max_mode; b <= max_mode; ++b)
            for (int c = -max_mode; c <= max_mode; ++c) {
                double amp = amplitude * unif(rng);
                double ph = phase(rng);
                Vec3 k{ku * a, ku * b, ku * c};
                for_each_cell(g, [&](std::size_t flat, int i, int j, int kk) {
                    f[flat] += amp * std::cos(k.dot(g.x_at(i, j, kk)) + ph);
                });
            }
    return f;
}

}  // namespace kgp
