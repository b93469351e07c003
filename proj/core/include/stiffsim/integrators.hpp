#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stiffsim/fastflow.hpp"
#include "stiffsim/model.hpp"
#include "stiffsim/noise.hpp"
#include "stiffsim/types.hpp"

namespace stiffsim {

enum class Method {
    Sim1Ham,             // phi^s(H) o phi^f(H), deterministic
    Sim1Lan,             // phi^s(H) o phi^f(H), full Langevin
    Sim2Lan,             // phi^s(H/2) o phi^f(H) o phi^s(H/2)
    Sim4Det,             // 4th-order triple-jump composition, deterministic
    Gla1,                // OU substep + symplectic Euler of the full Hamiltonian
    FineSymplecticEuler, // fine deterministic reference
    FineEulerMaruyama,   // fine stochastic reference on a Brownian grid
};

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class NoiseMode { ExactSample, PathCoupled, None };

struct SubStep {
    enum class Kind { Fast, Slow };
    Kind kind;
    double duration;
};

/// One-step recipe: method, macro step, noise handling, and (for the
/// splitting methods) the ordered substep list, validated so fast and slow
/// durations each sum to H.
struct StepPlan {
    Method method = Method::Sim1Ham;
    double macro_step = 0.0;
    NoiseMode noise_mode = NoiseMode::None;
    double coupling_fine_h = 0.0;  // PathCoupled only: grid spacing
    std::vector<SubStep> substeps;
};

StepPlan make_step_plan(Method method, double H, NoiseMode mode = NoiseMode::None,
                        double coupling_fine_h = 0.0);

/// Per-path noise source handed to a stepper: an owned random stream
/// (ExactSample) or a shared Brownian grid with a consumption cursor
/// (PathCoupled).
struct NoiseContext {
    PathStream* stream = nullptr;
    const BrownianGrid* grid = nullptr;
    Index cursor = 0;
};

/// One-step map. Immutable after construction; all propagators, covariances
/// and aggregation tables are prepared once and shared across steps and
/// concurrent paths (each path owns its NoiseContext).
class Stepper {
  public:
    virtual ~Stepper() = default;
    virtual State step(const State& x, NoiseContext& ctx) const = 0;
    double macro_step() const { return plan_.macro_step; }
    const StepPlan& plan() const { return plan_; }

  protected:
    explicit Stepper(StepPlan plan) : plan_(std::move(plan)) {}
    StepPlan plan_;
};

std::unique_ptr<Stepper> make_stepper(const StiffSystem& unit_sys, const StepPlan& plan);

/// SIM step with the Gaussian kick frozen to a fixed value; the noise-frozen
/// map whose Jacobian the quasi-symplecticity checks differentiate.
std::unique_ptr<Stepper> make_frozen_kick_stepper(const StiffSystem& unit_sys, Method method,
                                                  double H, const Kick& kick);

struct IntegrateOptions {
    double blowup_threshold = 1e8;
};

/// Called with (step index, state); index 0 is the initial state.
using Recorder = std::function<void(long, const State&)>;

/// Applies N = round(T / H) one-step maps. Throws BlowUpError when the phase
/// space norm exceeds the threshold or the state stops being finite.
State integrate(const Stepper& stepper, State initial, double T, const Recorder& recorder = {},
                NoiseContext* ctx = nullptr, const IntegrateOptions& opts = {});

}  // namespace stiffsim
