// Coupled field-particle dynamics: exact free flows per Fourier mode, exact
// coupling kicks, Strang-split evolution, energies and local-energy norms,
// the adjoint (pullback) evolution of test functionals, and the Duhamel
// reconstruction of the field from a recorded particle trajectory.
//
// The one-step map is K(dt/2) F(dt) K(dt/2) where F is the decoupled free
// flow (field mode rotations + oscillator rotation) and K the coupling kick.
// Every subflow is the exact flow of its Hamiltonian term, so splitting
// error is the only time-discretization error.
#pragma once

#include "kgp/model.hpp"

#include <functional>
#include <optional>

namespace kgp {

struct FieldState {
    std::vector<RealField> phi, pi;  // d components each
};

struct ParticleState {
    Vec3 q = Vec3::Zero();
    Vec3 p = Vec3::Zero();
};

struct FullState {
    FieldState field;
    ParticleState particle;
};

// Dual object Z = (psi, u, v); psi pairs (psi0, psi1) pair with (phi, pi).
struct TestFunctional {
    std::vector<RealField> psi0, psi1;  // d components each
    Vec3 u = Vec3::Zero();
    Vec3 v = Vec3::Zero();
};

FullState zero_state(const PreparedModel& model);
TestFunctional zero_functional(const PreparedModel& model);

struct InstabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Exact free flow of one Fourier mode over time t:
//   a <- cos(w t) a + sin(w t)/w b,   b <- -w sin(w t) a + cos(w t) b
// with the w -> 0 limit a <- a + t b.
inline void mode_rotate(double w, double t, Cplx& a, Cplx& b) {
    if (w > 0.0) {
        double c = std::cos(w * t), s = std::sin(w * t);
        Cplx a2 = c * a + (s / w) * b;
        b = -w * s * a + c * b;
        a = a2;
    } else {
        a += t * b;
    }
}

// Transpose of mode_rotate at the same (w, t).
inline void mode_rotate_adjoint(double w, double t, Cplx& a, Cplx& b) {
    if (w > 0.0) {
        double c = std::cos(w * t), s = std::sin(w * t);
        Cplx a2 = c * a - w * s * b;
        b = (s / w) * a + c * b;
        a = a2;
    } else {
        b += t * a;
    }
}

// --- elementary flows (x-space contracts; unit-test surface) ---------------

// Exact free Klein-Gordon flow of all components over time t.
void free_field_step(const PreparedModel& model, FieldState& state, double t);

// Exact oscillator rotation.
ParticleState harmonic_step(const ParticleState& particle, double omega, double t);

// Exact flow of the coupling term over time dt (phi and q frozen):
//   pi_n -= dt * q . grad rho_n,   p -= dt * sum_n <phi_n, grad rho_n>.
void coupling_kick(const PreparedModel& model, FullState& state, double dt);

// RHS of the coupled equations of motion (used by the dense oracle).
FullState time_derivative(const PreparedModel& model, const FullState& y);

// --- energies and norms ------------------------------------------------------

double hamiltonian(const PreparedModel& model, const FullState& y);

// Local energy seminorm over the ball |x| < R (sharp indicator):
//   sum_n int_{|x|<R} (|grad phi_n|^2 + m_n^2 phi_n^2 + pi_n^2) + |q|^2 + |p|^2,
// returned as the square root.  R = L/2 covers the whole box by convention.
double local_energy_norm(const PreparedModel& model, const FullState& y, double R);

// Companion seminorm with the massless-friendly field part
// |phi|^2 + |grad phi|^2 + |pi|^2 on the ball.
double local_state_norm(const PreparedModel& model, const FullState& y, double R);

double inner(const GridSpec& grid, const FullState& y, const TestFunctional& z);

// --- coupled evolution -------------------------------------------------------

struct EvolveOptions {
    int sample_stride = 10;           // steps between H/norm samples (>= 1)
    std::vector<double> norm_radii;   // radii for both local norms
    double instability_factor = 10.0; // throw when H exceeds factor * H(0)
};

struct Trajectory {
    std::vector<double> t;   // every step, size steps+1
    std::vector<Vec3> q, p;  // every step
    std::vector<double> sample_t;
    std::vector<double> energy;                    // H at sample_t
    std::vector<std::vector<double>> norm_energy;  // [radius][sample]
    std::vector<std::vector<double>> norm_state;   // [radius][sample]
    FullState final_state;
    double dt = 0.0;
};

// Strang evolution over [0, T]; T must be a multiple of dt.
Trajectory evolve(const PreparedModel& model, const FullState& y0, double T, double dt,
                  const EvolveOptions& opts = {});

// Adjoint flow: <U(T) Y, Z> = <Y, U'(T) Z> for all Y, realized by the
// transposed splitting stages in reversed order.
TestFunctional adjoint_pullback(const PreparedModel& model, const TestFunctional& z,
                                double T, double dt);

// One pass returning U'(t) Z for every t in t_list (sorted, multiples of dt).
std::vector<TestFunctional> adjoint_pullback_multi(const PreparedModel& model,
                                                   const TestFunctional& z,
                                                   const std::vector<double>& t_list,
                                                   double dt);

// Field at time T = (q_history.size()-1) * dt from the free flow of
// (phi0, pi0) plus the time-convolved coupling source driven by the recorded
// particle positions (trapezoidal quadrature at step resolution).
FieldState duhamel_reconstruct(const PreparedModel& model, const FieldState& initial,
                               const std::vector<Vec3>& q_history, double dt);

// --- spectral-state interface (hot path; also used by measures/scattering) --

struct SpectralState {
    std::vector<ComplexField> phi, pi;
    Vec3 q = Vec3::Zero();
    Vec3 p = Vec3::Zero();
};

SpectralState to_spectral(const PreparedModel& model, const FullState& y);
FullState to_physical(const PreparedModel& model, const SpectralState& s);
SpectralState to_spectral(const PreparedModel& model, const TestFunctional& z);
TestFunctional functional_to_physical(const PreparedModel& model, const SpectralState& s);

void strang_step(const PreparedModel& model, SpectralState& s, double dt);
void strang_step_adjoint(const PreparedModel& model, SpectralState& s, double dt);
double hamiltonian_spectral(const PreparedModel& model, const SpectralState& s);

}  // namespace kgp
