#pragma once

#include <map>
#include <string>
#include <vector>

#include "stiffsim/model.hpp"
#include "stiffsim/types.hpp"

namespace stiffsim {

/// A registered benchmark: validated unit-mass system, initial state, and
/// named scalar observables.
struct Problem {
    std::string name;
    StiffSystem system;
    State initial;
    double omega = 0.0;  // stiff frequency scale, h defaults derive from it
    std::vector<std::string> observable_names;
    std::function<Vector(const State&)> observables;
};

/// Wall -- stiff spring -- mass -- cubic soft spring -- mass, both masses
/// under isotropic noise and friction. Coordinates (x, y); only x carries
/// stiffness, y is a zero-frequency free mode.
struct TwoSpringConfig {
    double omega = 100.0;
    double c = 0.1;
    double beta = 10.0;  // sigma = sqrt(2 c / beta)
    // NaN means the benchmark default x0 = 0.8/omega, y0 = 1.1 + x0, p = 0.
    double x0 = std::nan("");
    double y0 = std::nan("");
    double px0 = 0.0;
    double py0 = 0.0;
};

Problem build_two_spring(const TwoSpringConfig& cfg);

/// Fermi-Pasta-Ulam chain of m stiff springs, built directly in the
/// transformed coordinates where the fast potential is diagonal: midpoints
/// x_1..x_m are free modes, expansions x_{m+1}..x_{2m} carry frequency omega.
struct FpuConfig {
    double omega = 200.0;
    int m = 3;
    // NaN/empty means the benchmark default x = [1, 0, .., 1/omega, 0, ..], y = 0.
    std::vector<double> x0;
    std::vector<double> y0;
};

Problem build_fpu(const FpuConfig& cfg);

/// Orthogonal change of variables between particle coordinates (q, p) and
/// spring coordinates (x, y): x_i = (q_{2i} + q_{2i-1})/sqrt(2),
/// x_{m+i} = (q_{2i} - q_{2i-1})/sqrt(2), same for momenta.
Matrix fpu_transform_matrix(int m);
State fpu_to_spring_coordinates(const State& particle, int m);
State fpu_from_spring_coordinates(const State& spring, int m);

struct FpuObservables {
    Vector expansions;       // x_{m+i}
    Vector midpoints;        // x_i
    Vector spring_energies;  // I_j = (y_{m+j}^2 + omega^2 x_{m+j}^2) / 2
    double total_stiff_energy = 0.0;
};

FpuObservables fpu_observables(const State& spring_state, const FpuConfig& cfg);

/// Strictly positive-definite d=2 test system with incommensurate stiff
/// frequencies omega and sqrt(kratio) omega and a smooth bounded soft force.
struct HarmonicConfig {
    double omega = 10.0;
    double kratio = 2.0;
    double c = 0.0;
    double beta = 0.0;  // with c > 0: sigma = sqrt(2 c / beta)
    bool soft = true;   // false: pure (damped, noisy) oscillator
    double q0x = std::nan("");  // default 0.8/omega
    double q0y = std::nan("");  // default 0.6/omega
    double p0x = 0.2;
    double p0y = -0.1;
};

Problem build_harmonic(const HarmonicConfig& cfg);

/// Registry addressable from config files: "two-spring", "fpu", "harmonic".
Problem build_problem(const std::string& name, const std::map<std::string, double>& params);
std::vector<std::string> problem_names();

enum class ResonanceKind { FullPeriod, QuarterPeriod };

/// Snaps H to the nearest step with sin(omega H) = 0 (full period) or
/// cos(omega H) = 0 (quarter period).
double resonant_step(double requested_H, double omega, ResonanceKind kind);

}  // namespace stiffsim
