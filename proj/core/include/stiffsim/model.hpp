#pragma once

#include <optional>
#include <utility>

#include "stiffsim/types.hpp"

namespace stiffsim {

/// Whether zero eigenvalues of the stiffness matrix are rejected (strict SPD,
/// the default) or treated as zero-frequency free modes via the analytic
/// omega -> 0 limit of the flow formulas. Benchmark builders use Extend.
enum class ZeroModePolicy { Reject, Extend };

/// Stiff Langevin system
///
///     M dq = p dt
///     dp   = F(q) dt - eps^{-1} K q dt - c p dt + sigma dW.
///
/// K and M symmetric positive definite, c positive semi-definite and
/// commuting with K, sigma the noise amplitude. The stiff frequencies scale
/// as eps^{-1/2}.
struct StiffSystem {
    Index dim = 0;
    Matrix M;
    Matrix K;       // scaleless elasticity matrix; stiff part is eps^{-1} K
    double eps = 1.0;
    Matrix c;       // viscous damping
    Matrix sigma;   // noise amplitude
    ForceFn soft_force;         // empty means F == 0
    PotentialFn soft_potential; // optional, for energy diagnostics
    std::optional<double> lipschitz;  // user-declared Lipschitz constant of F
    ZeroModePolicy zero_mode_policy = ZeroModePolicy::Reject;

    // Filled in by validate_system.
    bool validated = false;
    double commutation_defect = 0.0;

    Vector force(const Vector& q) const {
        return soft_force ? soft_force(q) : Vector(Vector::Zero(q.size()));
    }
    bool has_noise() const { return sigma.size() > 0 && sigma.cwiseAbs().maxCoeff() > 0.0; }
    bool has_damping() const { return c.size() > 0 && c.cwiseAbs().maxCoeff() > 0.0; }
    bool unit_mass() const { return M.isIdentity(1e-14); }
};

/// Invertible change of variables q~ = M^{1/2} q, p~ = M^{-1/2} p mapping a
/// system to unit mass and back.
struct MassTransform {
    Matrix sqrt_m;
    Matrix inv_sqrt_m;
    bool is_identity = true;

    State to_unit_mass(const State& s) const;
    State from_unit_mass(const State& s) const;
};

/// Convenience constructor: scalar damping c stored as c*I, isotropic noise
/// sigma*I, unit mass.
StiffSystem make_isotropic_system(Index dim, Matrix K, double eps, double damping,
                                  double noise, ForceFn force = {}, PotentialFn potential = {});

/// Checks the StiffSystem invariants: K, M symmetric positive definite
/// (K positive semi-definite under ZeroModePolicy::Extend), c positive
/// semi-definite, K and c commuting within tol_commute (relative to
/// ||K||_2 ||c||_2). Returns the system with the measured commutation defect
/// recorded. Throws NotSpdError, NotPsdError or CommutationViolationError.
StiffSystem validate_system(StiffSystem sys, double tol_commute = 1e-10);

/// Reduces a validated system to unit mass: q~ = M^{1/2} q, p~ = M^{-1/2} p,
/// K~ = M^{-1/2} K M^{-1/2}, sigma~ = M^{-1/2} sigma, F~(q~) =
/// M^{-1/2} F(M^{-1/2} q~). The damping transforms as the similarity
/// c~ = M^{-1/2} c M^{1/2} (the friction term is -c p, not -c q_dot), which
/// is required to stay symmetric within tolerance, i.e. c must commute
/// with M. All downstream modules operate on the unit-mass form.
std::pair<StiffSystem, MassTransform> mass_weighted_form(const StiffSystem& sys);

}  // namespace stiffsim
