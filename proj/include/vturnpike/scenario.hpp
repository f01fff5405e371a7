#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vturnpike/model.hpp"
#include "vturnpike/numerics.hpp"
#include "vturnpike/ocp.hpp"
#include "vturnpike/turnpike.hpp"

namespace vturnpike {

struct TurnpikeSection {
    std::vector<double> eps_grid{0.1, 0.25, 0.5, 1.0};
    double nu_bar = 3.0;
    double delta_exact = 1e-9;
};

struct DissipativitySection {
    StorageSpec storage;
    std::optional<double> alpha_a;  // nullopt: "fit"
    std::optional<double> reach_time_in;
    std::optional<double> reach_time_out;
};

struct SteadySection {
    Vec v_guess, u_guess, lambda_guess;
};

/// Parsed scenario document. Every section is validated when loaded.
struct ScenarioFile {
    ScenarioFile(SystemModel system, StageCost cost) : system(std::move(system)), cost(std::move(cost)) {}

    SystemModel system;
    StageCost cost;
    /// True for the scalar double integrator with l = 1/2 (v^2 + u^2),
    /// the only problem with a closed-form solution.
    bool closed_form = false;

    std::optional<double> T;
    std::vector<double> T_sweep;
    Vec q0, v0, qT, vT;
    int N = 100;
    std::optional<Box> bounds;

    std::optional<TurnpikeSection> turnpike;
    std::optional<DissipativitySection> dissipativity;
    SteadySection steady;
    NewtonConfig newton;
    IndirectOptions indirect;

    OcpSpec ocp(double horizon) const;
    /// T_sweep when present, otherwise the single T.
    std::vector<double> horizons() const;
};

/// Parses a JSON scenario. Unknown keys, wrong types and missing required
/// entries raise ValidationError naming the offending path (e.g. "ocp.T").
ScenarioFile parse_scenario(const std::string& text);

/// Reads and parses a scenario file; unreadable files raise IoError.
ScenarioFile load_scenario(const std::string& path);

}  // namespace vturnpike
