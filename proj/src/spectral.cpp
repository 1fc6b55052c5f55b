#include "kgp/spectral.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

namespace kgp {

namespace {
// FFTW planning is not thread safe; execution on distinct buffers is.
std::mutex g_plan_mutex;
}  // namespace

struct SpectralEngine::Impl {
    fftw_complex* in = nullptr;
    fftw_complex* out = nullptr;
    fftw_plan plus;   // exp(+i k.x) accumulation (FFTW_BACKWARD)
    fftw_plan minus;  // exp(-i k.x) accumulation (FFTW_FORWARD)
    std::size_t size = 0;

    Impl(int n, std::size_t sz) : size(sz) {
        in = fftw_alloc_complex(sz);
        out = fftw_alloc_complex(sz);
        std::lock_guard<std::mutex> lock(g_plan_mutex);
        plus = fftw_plan_dft_3d(n, n, n, in, out, FFTW_BACKWARD, FFTW_MEASURE);
        minus = fftw_plan_dft_3d(n, n, n, in, out, FFTW_FORWARD, FFTW_MEASURE);
    }
    ~Impl() {
        std::lock_guard<std::mutex> lock(g_plan_mutex);
        fftw_destroy_plan(plus);
        fftw_destroy_plan(minus);
        fftw_free(in);
        fftw_free(out);
    }
};

SpectralEngine::SpectralEngine(const GridSpec& grid)
    : grid_(grid), impl_(std::make_unique<Impl>(grid.n, grid.size())) {}

SpectralEngine::~SpectralEngine() = default;

void SpectralEngine::forward(const RealField& f, ComplexField& out) const {
    if (f.size() != grid_.size()) throw std::invalid_argument("forward: field size mismatch");
    out.resize(grid_.size());
    const double h3 = grid_.cell_volume();
    for (std::size_t i = 0; i < f.size(); ++i) {
        impl_->in[i][0] = f[i];
        impl_->in[i][1] = 0.0;
    }
    fftw_execute(impl_->plus);
    for (std::size_t i = 0; i < f.size(); ++i)
        out[i] = Cplx{impl_->out[i][0] * h3, impl_->out[i][1] * h3};
}

ComplexField SpectralEngine::forward(const RealField& f) const {
    ComplexField out;
    forward(f, out);
    return out;
}

double SpectralEngine::inverse(const ComplexField& f, RealField& out) const {
    if (f.size() != grid_.size()) throw std::invalid_argument("inverse: field size mismatch");
    out.resize(grid_.size());
    const double scale = 1.0 / grid_.volume();
    std::memcpy(impl_->in, f.data(), f.size() * sizeof(fftw_complex));
    fftw_execute(impl_->minus);
    double max_imag = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        out[i] = impl_->out[i][0] * scale;
        double im = std::abs(impl_->out[i][1] * scale);
        if (im > max_imag) max_imag = im;
    }
    return max_imag;
}

RealField SpectralEngine::inverse(const ComplexField& f) const {
    RealField out;
    inverse(f, out);
    return out;
}

void SpectralEngine::forward_c2c(const ComplexField& f, ComplexField& out) const {
    if (f.size() != grid_.size()) throw std::invalid_argument("forward_c2c: size mismatch");
    out.resize(grid_.size());
    const double h3 = grid_.cell_volume();
    std::memcpy(impl_->in, f.data(), f.size() * sizeof(fftw_complex));
    fftw_execute(impl_->plus);
    for (std::size_t i = 0; i < f.size(); ++i)
        out[i] = Cplx{impl_->out[i][0] * h3, impl_->out[i][1] * h3};
}

void SpectralEngine::inverse_c2c(const ComplexField& f, ComplexField& out) const {
    if (f.size() != grid_.size()) throw std::invalid_argument("inverse_c2c: size mismatch");
    out.resize(grid_.size());
    const double scale = 1.0 / grid_.volume();
    std::memcpy(impl_->in, f.data(), f.size() * sizeof(fftw_complex));
    fftw_execute(impl_->minus);
    for (std::size_t i = 0; i < f.size(); ++i)
        out[i] = Cplx{impl_->out[i][0] * scale, impl_->out[i][1] * scale};
}

void SpectralEngine::derivative(const ComplexField& f, int axis, ComplexField& out) const {
    if (f.size() != grid_.size()) throw std::invalid_argument("derivative: size mismatch");
    if (axis < 0 || axis > 2) throw std::invalid_argument("derivative: axis must be 0..2");
    out.resize(grid_.size());
    // The Nyquist row has no reflection partner; a real field's content there
    // is cosine-type whose derivative vanishes on the grid, so the multiplier
    // is zeroed on that plane (keeps derivatives of real fields real and the
    // k_i sums reflection-symmetric).
    const int ny = grid_.n / 2;
    for_each_cell(grid_, [&](std::size_t flat, int i, int j, int k) {
        int idx[3] = {i, j, k};
        if (idx[axis] == ny) {
            out[flat] = Cplx{0.0, 0.0};
        } else {
            Vec3 kv = grid_.k_at(i, j, k);
            out[flat] = Cplx{0.0, -kv[axis]} * f[flat];
        }
    });
}

std::vector<double> dispersion_table(const GridSpec& g, double mass) {
    std::vector<double> t(g.size());
    const double m2 = mass * mass, ku = g.k_unit();
    for_each_cell(g, [&](std::size_t flat, int i, int j, int k) {
        t[flat] = std::sqrt(ku * ku * g.mode_m2(i, j, k) + m2);
    });
    return t;
}

std::vector<double> fundamental_multiplier(const GridSpec& g, double mass) {
    std::vector<double> t(g.size());
    const double m2 = mass * mass, ku = g.k_unit();
    for_each_cell(g, [&](std::size_t flat, int i, int j, int k) {
        double d = ku * ku * g.mode_m2(i, j, k) + m2;
        t[flat] = d > 0.0 ? 1.0 / d : 0.0;
    });
    return t;
}

}  // namespace kgp
