#include "kgp/dynamics.hpp"

#include <cmath>
#include <sstream>

namespace kgp {

namespace {

long long steps_for(double T, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("evolve: dt must be > 0");
    if (T < 0.0) throw std::invalid_argument("evolve: T must be >= 0");
    long long n = std::llround(T / dt);
    if (std::abs(n * dt - T) > 1e-9 * std::max(1.0, std::abs(T)))
        throw std::invalid_argument("evolve: T must be an integer multiple of dt");
    return n;
}

// spectral coupling kick on a state
void kick_spectral(const PreparedModel& model, SpectralState& s, double dt) {
    Vec3 dp = Vec3::Zero();
    for (int n = 0; n < model.d(); ++n) {
        const auto& grad_hat = model.profiles[n].grad_rho_hat;
        for (int a = 0; a < 3; ++a)
            dp[a] += inner_k(model.grid, s.phi[n], grad_hat[a]);
    }
    const Vec3 q = s.q;
    for (int n = 0; n < model.d(); ++n) {
        const auto& grad_hat = model.profiles[n].grad_rho_hat;
        auto& pi = s.pi[n];
        for (std::size_t i = 0; i < pi.size(); ++i)
            pi[i] -= dt * (q[0] * grad_hat[0][i] + q[1] * grad_hat[1][i] + q[2] * grad_hat[2][i]);
    }
    s.p -= dt * dp;
}

// transpose of kick_spectral acting on a functional in spectral form
// (phi slot = psi0, pi slot = psi1, q slot = u, p slot = v)
void kick_spectral_adjoint(const PreparedModel& model, SpectralState& s, double dt) {
    Vec3 du = Vec3::Zero();
    for (int n = 0; n < model.d(); ++n) {
        const auto& grad_hat = model.profiles[n].grad_rho_hat;
        for (int a = 0; a < 3; ++a)
            du[a] += inner_k(model.grid, s.pi[n], grad_hat[a]);
    }
    const Vec3 v = s.p;
    for (int n = 0; n < model.d(); ++n) {
        const auto& grad_hat = model.profiles[n].grad_rho_hat;
        auto& psi0 = s.phi[n];
        for (std::size_t i = 0; i < psi0.size(); ++i)
            psi0[i] -= dt * (v[0] * grad_hat[0][i] + v[1] * grad_hat[1][i] + v[2] * grad_hat[2][i]);
    }
    s.q -= dt * du;
}

void free_rotate(const PreparedModel& model, SpectralState& s, double t, bool adjoint) {
    for (int n = 0; n < model.d(); ++n) {
        const auto& w = model.omega_n[n];
        auto& a = s.phi[n];
        auto& b = s.pi[n];
        if (adjoint)
            for (std::size_t i = 0; i < a.size(); ++i) mode_rotate_adjoint(w[i], t, a[i], b[i]);
        else
            for (std::size_t i = 0; i < a.size(); ++i) mode_rotate(w[i], t, a[i], b[i]);
    }
}

void particle_rotate(double omega, double t, Vec3& q, Vec3& p, bool adjoint) {
    double c = std::cos(omega * t), s = std::sin(omega * t);
    Vec3 q2, p2;
    if (!adjoint) {
        q2 = c * q + (s / omega) * p;
        p2 = -omega * s * q + c * p;
    } else {
        q2 = c * q - omega * s * p;
        p2 = (s / omega) * q + c * p;
    }
    q = q2;
    p = p2;
}

double ball_mask_norm2(const PreparedModel& model, const FullState& y, double R,
                       bool energy_weights) {
    const GridSpec& g = model.grid;
    if (!(R > 0.0) || R > 0.5 * g.box_length + 1e-12)
        throw std::invalid_argument("local norm: radius must satisfy 0 < R <= L/2");
    const bool whole_box = R >= 0.5 * g.box_length - 1e-12;
    const double R2 = R * R;
    const double h3 = g.cell_volume();
    double total = 0.0;
    const SpectralEngine& eng = *model.engine;
    ComplexField hat, dhat;
    RealField grad;
    for (int n = 0; n < model.d(); ++n) {
        const double m2 = model.mass(n) * model.mass(n);
        const double w0 = energy_weights ? m2 : 1.0;  // weight of |phi|^2
        eng.forward(y.field.phi[n], hat);
        std::array<RealField, 3> grads;
        for (int a = 0; a < 3; ++a) {
            eng.derivative(hat, a, dhat);
            grads[a] = eng.inverse(dhat);
        }
        const auto& phi = y.field.phi[n];
        const auto& pi = y.field.pi[n];
        double acc = 0.0;
        for_each_cell(g, [&](std::size_t flat, int i, int j, int k) {
            if (!whole_box && g.x_at(i, j, k).squaredNorm() >= R2) return;
            double gg = grads[0][flat] * grads[0][flat] + grads[1][flat] * grads[1][flat] +
                        grads[2][flat] * grads[2][flat];
            acc += gg + w0 * phi[flat] * phi[flat] + pi[flat] * pi[flat];
        });
        total += acc * h3;
    }
    total += y.particle.q.squaredNorm() + y.particle.p.squaredNorm();
    return total;
}

}  // namespace

FullState zero_state(const PreparedModel& model) {
    FullState y;
    y.field.phi.assign(model.d(), make_real_field(model.grid));
    y.field.pi.assign(model.d(), make_real_field(model.grid));
    return y;
}

TestFunctional zero_functional(const PreparedModel& model) {
    TestFunctional z;
    z.psi0.assign(model.d(), make_real_field(model.grid));
    z.psi1.assign(model.d(), make_real_field(model.grid));
    return z;
}

void free_field_step(const PreparedModel& model, FieldState& state, double t) {
    for (int n = 0; n < model.d(); ++n) {
        ComplexField a = model.engine->forward(state.phi[n]);
        ComplexField b = model.engine->forward(state.pi[n]);
        const auto& w = model.omega_n[n];
        for (std::size_t i = 0; i < a.size(); ++i) mode_rotate(w[i], t, a[i], b[i]);
        state.phi[n] = model.engine->inverse(a);
        state.pi[n] = model.engine->inverse(b);
    }
}

ParticleState harmonic_step(const ParticleState& particle, double omega, double t) {
    if (!(omega > 0.0)) throw std::invalid_argument("harmonic_step: omega must be > 0");
    ParticleState out = particle;
    particle_rotate(omega, t, out.q, out.p, false);
    return out;
}

void coupling_kick(const PreparedModel& model, FullState& state, double dt) {
    Vec3 dp = Vec3::Zero();
    for (int n = 0; n < model.d(); ++n)
        for (int a = 0; a < 3; ++a)
            dp[a] += inner_x(model.grid, state.field.phi[n], model.profiles[n].grad_rho[a]);
    const Vec3 q = state.particle.q;
    for (int n = 0; n < model.d(); ++n) {
        const auto& gr = model.profiles[n].grad_rho;
        auto& pi = state.field.pi[n];
        for (std::size_t i = 0; i < pi.size(); ++i)
            pi[i] -= dt * (q[0] * gr[0][i] + q[1] * gr[1][i] + q[2] * gr[2][i]);
    }
    state.particle.p -= dt * dp;
}

FullState time_derivative(const PreparedModel& model, const FullState& y) {
    FullState dy = zero_state(model);
    const SpectralEngine& eng = *model.engine;
    for (int n = 0; n < model.d(); ++n) {
        dy.field.phi[n] = y.field.pi[n];
        // (Laplace - m^2) phi via the dispersion multiplier
        ComplexField hat = eng.forward(y.field.phi[n]);
        const auto& w = model.omega_n[n];
        for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= -w[i] * w[i];
        dy.field.pi[n] = eng.inverse(hat);
        const auto& gr = model.profiles[n].grad_rho;
        const Vec3 q = y.particle.q;
        for (std::size_t i = 0; i < hat.size(); ++i)
            dy.field.pi[n][i] -= q[0] * gr[0][i] + q[1] * gr[1][i] + q[2] * gr[2][i];
    }
    dy.particle.q = y.particle.p;
    Vec3 f = Vec3::Zero();
    for (int n = 0; n < model.d(); ++n)
        for (int a = 0; a < 3; ++a)
            f[a] += inner_x(model.grid, y.field.phi[n], model.profiles[n].grad_rho[a]);
    dy.particle.p = -model.config.omega * model.config.omega * y.particle.q - f;
    return dy;
}

double hamiltonian(const PreparedModel& model, const FullState& y) {
    return hamiltonian_spectral(model, to_spectral(model, y));
}

double hamiltonian_spectral(const PreparedModel& model, const SpectralState& s) {
    double field_part = 0.0;
    Vec3 coupling = Vec3::Zero();
    for (int n = 0; n < model.d(); ++n) {
        const auto& w = model.omega_n[n];
        const auto& a = s.phi[n];
        const auto& b = s.pi[n];
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            acc += w[i] * w[i] * std::norm(a[i]) + std::norm(b[i]);
        field_part += 0.5 * acc / model.grid.volume();
        for (int ax = 0; ax < 3; ++ax)
            coupling[ax] += inner_k(model.grid, a, model.profiles[n].grad_rho_hat[ax]);
    }
    const double w2 = model.config.omega * model.config.omega;
    return field_part + s.q.dot(coupling) + 0.5 * (s.p.squaredNorm() + w2 * s.q.squaredNorm());
}

double local_energy_norm(const PreparedModel& model, const FullState& y, double R) {
    return std::sqrt(ball_mask_norm2(model, y, R, true));
}

double local_state_norm(const PreparedModel& model, const FullState& y, double R) {
    return std::sqrt(ball_mask_norm2(model, y, R, false));
}

double inner(const GridSpec& grid, const FullState& y, const TestFunctional& z) {
    double s = 0.0;
    for (std::size_t n = 0; n < y.field.phi.size(); ++n) {
        s += inner_x(grid, y.field.phi[n], z.psi0[n]);
        s += inner_x(grid, y.field.pi[n], z.psi1[n]);
    }
    return s + y.particle.q.dot(z.u) + y.particle.p.dot(z.v);
}

SpectralState to_spectral(const PreparedModel& model, const FullState& y) {
    SpectralState s;
    s.phi.resize(model.d());
    s.pi.resize(model.d());
    for (int n = 0; n < model.d(); ++n) {
        model.engine->forward(y.field.phi[n], s.phi[n]);
        model.engine->forward(y.field.pi[n], s.pi[n]);
    }
    s.q = y.particle.q;
    s.p = y.particle.p;
    return s;
}

FullState to_physical(const PreparedModel& model, const SpectralState& s) {
    FullState y = zero_state(model);
    for (int n = 0; n < model.d(); ++n) {
        model.engine->inverse(s.phi[n], y.field.phi[n]);
        model.engine->inverse(s.pi[n], y.field.pi[n]);
    }
    y.particle.q = s.q;
    y.particle.p = s.p;
    return y;
}

SpectralState to_spectral(const PreparedModel& model, const TestFunctional& z) {
    SpectralState s;
    s.phi.resize(model.d());
    s.pi.resize(model.d());
    for (int n = 0; n < model.d(); ++n) {
        model.engine->forward(z.psi0[n], s.phi[n]);
        model.engine->forward(z.psi1[n], s.pi[n]);
    }
    s.q = z.u;
    s.p = z.v;
    return s;
}

TestFunctional functional_to_physical(const PreparedModel& model, const SpectralState& s) {
    TestFunctional z = zero_functional(model);
    for (int n = 0; n < model.d(); ++n) {
        model.engine->inverse(s.phi[n], z.psi0[n]);
        model.engine->inverse(s.pi[n], z.psi1[n]);
    }
    z.u = s.q;
    z.v = s.p;
    return z;
}

void strang_step(const PreparedModel& model, SpectralState& s, double dt) {
    kick_spectral(model, s, 0.5 * dt);
    free_rotate(model, s, dt, false);
    particle_rotate(model.config.omega, dt, s.q, s.p, false);
    kick_spectral(model, s, 0.5 * dt);
}

void strang_step_adjoint(const PreparedModel& model, SpectralState& s, double dt) {
    kick_spectral_adjoint(model, s, 0.5 * dt);
    free_rotate(model, s, dt, true);
    particle_rotate(model.config.omega, dt, s.q, s.p, true);
    kick_spectral_adjoint(model, s, 0.5 * dt);
}

Trajectory evolve(const PreparedModel& model, const FullState& y0, double T, double dt,
                  const EvolveOptions& opts) {
    const long long nsteps = steps_for(T, dt);
    const int stride = std::max(1, opts.sample_stride);

    Trajectory traj;
    traj.dt = dt;
    SpectralState s = to_spectral(model, y0);
    const double h0 = hamiltonian_spectral(model, s);
    const double h_guard = opts.instability_factor * std::max(h0, 1e-300);

    auto record_step = [&](long long step) {
        traj.t.push_back(step * dt);
        traj.q.push_back(s.q);
        traj.p.push_back(s.p);
    };
    auto record_sample = [&](long long step) {
        traj.sample_t.push_back(step * dt);
        double h = hamiltonian_spectral(model, s);
        traj.energy.push_back(h);
        if (h > h_guard && h0 >= 0.0) {
            std::ostringstream msg;
            msg << "evolve: energy " << h << " exceeded " << opts.instability_factor
                << " x initial " << h0 << " at t = " << step * dt
                << " (time step too large or positivity condition violated)";
            throw InstabilityError(msg.str());
        }
        if (!opts.norm_radii.empty()) {
            FullState y = to_physical(model, s);
            for (std::size_t r = 0; r < opts.norm_radii.size(); ++r) {
                traj.norm_energy[r].push_back(local_energy_norm(model, y, opts.norm_radii[r]));
                traj.norm_state[r].push_back(local_state_norm(model, y, opts.norm_radii[r]));
            }
        }
    };

    traj.norm_energy.assign(opts.norm_radii.size(), {});
    traj.norm_state.assign(opts.norm_radii.size(), {});
    record_step(0);
    record_sample(0);
    for (long long step = 1; step <= nsteps; ++step) {
        strang_step(model, s, dt);
        record_step(step);
        if (step % stride == 0 || step == nsteps) record_sample(step);
    }
    traj.final_state = to_physical(model, s);
    return traj;
}

TestFunctional adjoint_pullback(const PreparedModel& model, const TestFunctional& z,
                                double T, double dt) {
    auto out = adjoint_pullback_multi(model, z, {T}, dt);
    return out.front();
}

std::vector<TestFunctional> adjoint_pullback_multi(const PreparedModel& model,
                                                   const TestFunctional& z,
                                                   const std::vector<double>& t_list,
                                                   double dt) {
    std::vector<long long> step_marks;
    step_marks.reserve(t_list.size());
    for (double t : t_list) step_marks.push_back(steps_for(t, dt));
    for (std::size_t i = 1; i < step_marks.size(); ++i)
        if (step_marks[i] < step_marks[i - 1])
            throw std::invalid_argument("adjoint_pullback_multi: t_list must be sorted");

    std::vector<TestFunctional> out;
    out.reserve(t_list.size());
    SpectralState s = to_spectral(model, z);
    long long step = 0;
    for (long long mark : step_marks) {
        for (; step < mark; ++step) strang_step_adjoint(model, s, dt);
        out.push_back(functional_to_physical(model, s));
    }
    return out;
}

FieldState duhamel_reconstruct(const PreparedModel& model, const FieldState& initial,
                               const std::vector<Vec3>& q_history, double dt) {
    if (q_history.size() < 2)
        throw std::invalid_argument("duhamel_reconstruct: recorded trajectory missing or too short");
    const long long m = static_cast<long long>(q_history.size()) - 1;
    const double T = m * dt;

    FieldState out;
    out.phi.resize(model.d());
    out.pi.resize(model.d());
    for (int n = 0; n < model.d(); ++n) {
        ComplexField a = model.engine->forward(initial.phi[n]);
        ComplexField b = model.engine->forward(initial.pi[n]);
        const auto& w = model.omega_n[n];
        for (std::size_t i = 0; i < a.size(); ++i) mode_rotate(w[i], T, a[i], b[i]);

        const auto& grad_hat = model.profiles[n].grad_rho_hat;
        for (long long j = 0; j <= m; ++j) {
            const double weight = (j == 0 || j == m) ? 0.5 * dt : dt;
            const double tau = T - j * dt;
            const Vec3& q = q_history[j];
            for (std::size_t i = 0; i < a.size(); ++i) {
                Cplx src = q[0] * grad_hat[0][i] + q[1] * grad_hat[1][i] + q[2] * grad_hat[2][i];
                // W_n(tau) applied to the pair (0, src)
                Cplx sa{0.0, 0.0}, sb = src;
                mode_rotate(w[i], tau, sa, sb);
                a[i] -= weight * sa;
                b[i] -= weight * sb;
            }
        }
        out.phi[n] = model.engine->inverse(a);
        out.pi[n] = model.engine->inverse(b);
    }
    return out;
}

}  // namespace kgp
