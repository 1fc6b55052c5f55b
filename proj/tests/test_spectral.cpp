#include "kgp/spectral.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace kgp;

TEST_SUITE("spectral") {

TEST_CASE("zero transforms to zero") {
    GridSpec g(8.0, 8);
    SpectralEngine eng(g);
    ComplexField hat = eng.forward(make_real_field(g));
    for (const auto& c : hat) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("discrete delta transforms to a constant") {
    GridSpec g(8.0, 8);
    SpectralEngine eng(g);
    RealField f = make_real_field(g);
    f[g.index(0, 0, 0)] = 1.0;
    ComplexField hat = eng.forward(f);
    const Cplx expected{g.cell_volume(), 0.0};
    for (const auto& c : hat) CHECK(std::abs(c - expected) < 1e-14);
}

TEST_CASE("roundtrip and Parseval on a random field") {
    GridSpec g(8.0, 8);
    SpectralEngine eng(g);
    RealField f = test::random_field(g, 42);
    ComplexField hat = eng.forward(f);
    RealField back = eng.inverse(hat);
    CHECK(test::max_abs_diff(f, back) < 1e-12 * test::max_abs(f));

    double x_norm = 0.0, k_norm = 0.0;
    for (double v : f) x_norm += v * v;
    x_norm *= g.cell_volume();
    for (const auto& c : hat) k_norm += std::norm(c);
    k_norm /= g.volume();
    CHECK(std::abs(x_norm - k_norm) < 1e-12 * x_norm);
}

TEST_CASE("size mismatch raises") {
    GridSpec g(8.0, 8);
    SpectralEngine eng(g);
    RealField wrong(10, 0.0);
    CHECK_THROWS_AS((void)eng.forward(wrong), std::invalid_argument);
}

TEST_CASE("multiplier application equals circular convolution") {
    GridSpec g(6.0, 6);
    SpectralEngine eng(g);
    RealField f = test::random_field(g, 7);
    std::vector<double> mult = fundamental_multiplier(g, 1.0);

    ComplexField hat = eng.forward(f);
    for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= mult[i];
    RealField via_k = eng.inverse(hat);

    // kernel of the multiplier and direct circular convolution
    ComplexField mult_hat = make_complex_field(g);
    for (std::size_t i = 0; i < mult.size(); ++i) mult_hat[i] = mult[i];
    RealField kernel = eng.inverse(mult_hat);
    RealField via_x = make_real_field(g);
    const int n = g.n;
    for_each_cell(g, [&](std::size_t flat, int i, int j, int k) {
        double acc = 0.0;
        for_each_cell(g, [&](std::size_t flat2, int i2, int j2, int k2) {
            std::size_t shift =
                g.index(((i - i2) % n + n) % n, ((j - j2) % n + n) % n, ((k - k2) % n + n) % n);
            acc += kernel[shift] * f[flat2];
        });
        via_x[flat] = acc * g.cell_volume();
    });
    CHECK(test::max_abs_diff(via_k, via_x) < 1e-10 * test::max_abs(via_k));
}

TEST_CASE("even multipliers preserve realness") {
    GridSpec g(8.0, 8);
    SpectralEngine eng(g);
    RealField f = test::random_field(g, 9);
    ComplexField hat = eng.forward(f);
    std::vector<double> mult = dispersion_table(g, 0.5);
    for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= mult[i];
    RealField out;
    double max_imag = eng.inverse(hat, out);
    CHECK(max_imag < 1e-12 * test::max_abs(out));
}

TEST_CASE("dispersion relation values") {
    CHECK(dispersion(1.0, Vec3::Zero()) == doctest::Approx(1.0));
    CHECK(dispersion(4.0, Vec3{3.0, 0.0, 0.0}) == doctest::Approx(5.0));
    CHECK(dispersion(0.0, Vec3::Zero()) == 0.0);
    CHECK(dispersion(2.0, Vec3{1.0, 2.0, 2.0}) >= 2.0);
}

TEST_CASE("fundamental multiplier values and zero-mode rule") {
    GridSpec g(8.0, 8);
    std::vector<double> m1 = fundamental_multiplier(g, 1.0);
    CHECK(m1[g.index(0, 0, 0)] == doctest::Approx(1.0));
    std::vector<double> m0 = fundamental_multiplier(g, 0.0);
    CHECK(m0[g.index(0, 0, 0)] == 0.0);
}

TEST_CASE("fundamental multiplier inverts the shifted laplacian") {
    GridSpec g(8.0, 8);
    SpectralEngine eng(g);
    for (double mass : {1.0, 0.0}) {
        RealField f = test::random_field(g, 11);
        if (mass == 0.0) subtract_mean(f);
        ComplexField hat = eng.forward(f);
        std::vector<double> w = dispersion_table(g, mass);
        std::vector<double> e = fundamental_multiplier(g, mass);
        for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= w[i] * w[i] * e[i];
        RealField back = eng.inverse(hat);
        CHECK(test::max_abs_diff(f, back) < 1e-10 * test::max_abs(f));
    }
}

}  // TEST_SUITE
