// Experiment configuration: JSON schema, parsing with exhaustive validation
// (every error reported, not just the first), and construction of initial
// states and test functionals from their declarative specs.
#pragma once

#include "kgp/dynamics.hpp"
#include "kgp/measures.hpp"
#include "kgp/resolvent.hpp"

#include <optional>
#include <string>

namespace kgp {

enum class ExperimentKind {
    check_model,
    simulate,
    energy_decay,
    resolvent,
    plemelj,
    equilibrium,
    scattering,
};

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> experiment_from_string(const std::string& s);

struct FieldItemSpec {
    int component = 0;
    int slot = 0;  // 0 = phi/psi0, 1 = pi/psi1
    enum class Kind { bump, gaussian } kind = Kind::bump;
    Vec3 center = Vec3::Zero();
    double radius = 1.0;  // bump radius or gaussian sigma
    double amplitude = 1.0;
};

struct InitialSpec {
    std::vector<FieldItemSpec> field_items;
    Vec3 q0 = Vec3::Zero();
    Vec3 p0 = Vec3::Zero();
    bool subtract_mean = false;
};

struct FunctionalSpec {
    std::string name;
    Vec3 u = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    std::vector<FieldItemSpec> psi_items;
};

struct SimulateSpec {
    double t_max = 10.0;
    int sample_stride = 10;
    std::vector<double> norm_radii;
};

struct FitSpec {
    DecayKind kind = DecayKind::power;
    double t_lo = 0.0, t_hi = 0.0;
    double radius = 2.0;  // which norm radius the fit uses (energy-decay)
};

struct EnergyDecaySpec {
    SimulateSpec run;
    std::vector<FitSpec> fits;
};

struct ResolventSpec {
    ContourParams contour;
    double t_max = 20.0;
    double t_step = 0.01;
    std::optional<FitSpec> fit;
};

struct PlemeljSpec {
    std::vector<double> x_values;
    std::vector<double> epsilons{1e-2, 1e-3};
    Vec3 v = Vec3{1.0, 0.0, 0.0};
    int angular_order = 26;
};

struct EquilibriumSpec {
    std::vector<double> t_list;
    int sample_count = 2000;
    int trajectory_samples = 0;
    double moment_radius = 2.0;
    double s_max = 0.0;  // scattering horizon for Q_inf; 0 = auto
    double ds = 0.0;     // 0 = model dt
};

struct ScatteringSpec {
    double s_max = 0.0;  // 0 = auto (L/2 - R_rho - 1)
    double ds = 0.0;     // 0 = model dt
    std::vector<double> t_values{4.0, 8.0};
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::check_model;
    uint64_t seed = 1;
    int threads = 0;
    std::string output_dir = "out";
    ModelConfig model;
    double a3_threshold_factor = 1e-10;
    std::optional<InitialSpec> initial;
    std::optional<CovarianceSpec> covariance;
    std::vector<FunctionalSpec> functionals;
    SimulateSpec simulate;
    EnergyDecaySpec energy_decay;
    ResolventSpec resolvent;
    PlemeljSpec plemelj;
    EquilibriumSpec equilibrium;
    ScatteringSpec scattering;
    std::string config_echo;  // normalized JSON of the parsed config
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::vector<std::string>& errors);
    std::vector<std::string> errors;
};

// Parses and fully validates; throws ConfigError carrying every problem found.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

FullState build_initial_state(const PreparedModel& model, const InitialSpec& spec);
TestFunctional build_functional(const PreparedModel& model, const FunctionalSpec& spec);

}  // namespace kgp
