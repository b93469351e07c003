#include "stiffsim/integrators.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "stiffsim/errors.hpp"

namespace stiffsim {

namespace {

void check_finite(const State& s) {
    if (!all_finite(s)) throw NonFiniteStateError();
}

void require_deterministic(const StiffSystem& sys) {
    if (sys.has_noise() || sys.has_damping()) throw UnsupportedStochasticError();
}

// ---- kick providers ------------------------------------------------------

class KickProvider {
  public:
    virtual ~KickProvider() = default;
    virtual Kick get(NoiseContext& ctx) const = 0;
};

class ExactKickProvider final : public KickProvider {
  public:
    explicit ExactKickProvider(KickCovariance cov) : cov_(std::move(cov)) {}
    Kick get(NoiseContext& ctx) const override {
        if (!ctx.stream) throw ConfigError("exact-sample stepping requires a random stream");
        return sample_kick(cov_, *ctx.stream);
    }

  private:
    KickCovariance cov_;
};

class CoupledKickProvider final : public KickProvider {
  public:
    CoupledKickProvider(const ModalForm& modal, const Matrix& sigma, double H, double h)
        : agg_(modal, sigma, H, h) {}
    Kick get(NoiseContext& ctx) const override {
        if (!ctx.grid) throw ConfigError("path-coupled stepping requires a Brownian grid");
        const Index n = agg_.substeps();
        if (ctx.cursor + n > ctx.grid->count())
            throw GridMismatchError("Brownian grid exhausted");
        Kick k = agg_.aggregate(ctx.grid->increments.middleCols(ctx.cursor, n));
        ctx.cursor += n;
        return k;
    }

  private:
    CoupledKickAggregator agg_;
};

class FrozenKickProvider final : public KickProvider {
  public:
    explicit FrozenKickProvider(Kick k) : kick_(std::move(k)) {}
    Kick get(NoiseContext&) const override { return kick_; }

  private:
    Kick kick_;
};

std::unique_ptr<KickProvider> make_kick_provider(const StiffSystem& sys, const ModalForm& modal,
                                                 const StepPlan& plan) {
    if (!sys.has_noise()) return nullptr;
    switch (plan.noise_mode) {
        case NoiseMode::ExactSample:
            return std::make_unique<ExactKickProvider>(
                kick_covariance(modal, sys.sigma, plan.macro_step));
        case NoiseMode::PathCoupled:
            return std::make_unique<CoupledKickProvider>(modal, sys.sigma, plan.macro_step,
                                                         plan.coupling_fine_h);
        case NoiseMode::None:
            throw ConfigError("system has noise but the plan requests none");
    }
    return nullptr;
}

// Exact OU noise covariance factor: G G^T = int_0^h e^{-cs} sigma sigma^T e^{-cs} ds.
Matrix ou_noise_factor(const ModalForm& modal, const Matrix& sigma, double h) {
    const Index d = modal.dim();
    const Matrix ut_sigma = modal.U.transpose() * sigma;
    const Matrix S = ut_sigma * ut_sigma.transpose();
    Matrix cov(d, d);
    for (Index i = 0; i < d; ++i) {
        for (Index j = 0; j < d; ++j) {
            const double r = modal.damp(i) + modal.damp(j);
            const double integral = (r == 0.0) ? h : -std::expm1(-r * h) / r;
            cov(i, j) = S(i, j) * integral;
        }
    }
    cov = (modal.U * cov * modal.U.transpose()).eval();
    cov = (0.5 * (cov + cov.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

Matrix ou_decay(const ModalForm& modal, double h) {
    return modal.U * (-h * modal.damp).array().exp().matrix().asDiagonal() *
           modal.U.transpose();
}

// ---- steppers ------------------------------------------------------------

class Sim1HamStepper final : public Stepper {
  public:
    Sim1HamStepper(const StiffSystem& sys, StepPlan plan, const ModalForm& modal)
        : Stepper(std::move(plan)), sys_(sys),
          prop_(assemble_propagator(modal, plan_.macro_step)) {}

    State step(const State& x, NoiseContext&) const override {
        State out = prop_.apply(x);
        out.p += plan_.macro_step * sys_.force(out.q);
        check_finite(out);
        return out;
    }

  private:
    StiffSystem sys_;
    Propagator prop_;
};

class Sim1LanStepper final : public Stepper {
  public:
    Sim1LanStepper(const StiffSystem& sys, StepPlan plan, const ModalForm& modal,
                   std::unique_ptr<KickProvider> kicks)
        : Stepper(std::move(plan)), sys_(sys),
          prop_(assemble_propagator(modal, plan_.macro_step)), kicks_(std::move(kicks)) {}

    Sim1LanStepper(const StiffSystem& sys, StepPlan plan, const ModalForm& modal, Kick frozen)
        : Stepper(std::move(plan)), sys_(sys),
          prop_(assemble_propagator(modal, plan_.macro_step)),
          kicks_(std::make_unique<FrozenKickProvider>(std::move(frozen))) {}

    State step(const State& x, NoiseContext& ctx) const override {
        State out = prop_.apply(x);
        if (kicks_) {
            const Kick k = kicks_->get(ctx);
            out.q += k.rq;
            out.p += k.rp;
        }
        out.p += plan_.macro_step * sys_.force(out.q);
        check_finite(out);
        return out;
    }

  private:
    StiffSystem sys_;
    Propagator prop_;
    std::unique_ptr<KickProvider> kicks_;
};

class Sim2LanStepper final : public Stepper {
  public:
    Sim2LanStepper(const StiffSystem& sys, StepPlan plan, const ModalForm& modal,
                   std::unique_ptr<KickProvider> kicks)
        : Stepper(std::move(plan)), sys_(sys),
          prop_(assemble_propagator(modal, plan_.macro_step)), kicks_(std::move(kicks)) {}

    Sim2LanStepper(const StiffSystem& sys, StepPlan plan, const ModalForm& modal, Kick frozen)
        : Stepper(std::move(plan)), sys_(sys),
          prop_(assemble_propagator(modal, plan_.macro_step)),
          kicks_(std::make_unique<FrozenKickProvider>(std::move(frozen))) {}

    State step(const State& x, NoiseContext& ctx) const override {
        const double half = 0.5 * plan_.macro_step;
        State out = x;
        out.p += half * sys_.force(out.q);
        out = prop_.apply(out);
        if (kicks_) {
            const Kick k = kicks_->get(ctx);
            out.q += k.rq;
            out.p += k.rp;
        }
        out.p += half * sys_.force(out.q);
        check_finite(out);
        return out;
    }

  private:
    StiffSystem sys_;
    Propagator prop_;
    std::unique_ptr<KickProvider> kicks_;
};

class Sim4DetStepper final : public Stepper {
  public:
    Sim4DetStepper(const StiffSystem& sys, StepPlan plan, const ModalForm& modal)
        : Stepper(std::move(plan)), sys_(sys) {
        const double gamma = 1.0 / (2.0 - std::cbrt(2.0));
        const double H = plan_.macro_step;
        slow_outer_ = 0.5 * gamma * H;
        slow_inner_ = 0.5 * (1.0 - gamma) * H;
        prop_outer_ = assemble_propagator(modal, gamma * H);
        prop_mid_ = assemble_propagator(modal, (1.0 - 2.0 * gamma) * H);
    }

    State step(const State& x, NoiseContext&) const override {
        State out = x;
        out.p += slow_outer_ * sys_.force(out.q);
        out = prop_outer_.apply(out);
        out.p += slow_inner_ * sys_.force(out.q);
        out = prop_mid_.apply(out);
        out.p += slow_inner_ * sys_.force(out.q);
        out = prop_outer_.apply(out);
        out.p += slow_outer_ * sys_.force(out.q);
        out.t = x.t + plan_.macro_step;
        check_finite(out);
        return out;
    }

  private:
    StiffSystem sys_;
    double slow_outer_ = 0.0, slow_inner_ = 0.0;
    Propagator prop_outer_, prop_mid_;
};

class Gla1Stepper final : public Stepper {
  public:
    Gla1Stepper(const StiffSystem& sys, StepPlan plan, const ModalForm& modal)
        : Stepper(std::move(plan)), sys_(sys), keps_(sys.K / sys.eps) {
        const double h = plan_.macro_step;
        if (sys.has_damping()) decay_ = ou_decay(modal, h);
        if (sys.has_noise()) noise_factor_ = ou_noise_factor(modal, sys.sigma, h);
    }

    State step(const State& x, NoiseContext& ctx) const override {
        const double h = plan_.macro_step;
        State out = x;
        // Exact OU substep on p.
        if (decay_.size() > 0) out.p = (decay_ * out.p).eval();
        if (noise_factor_.size() > 0) {
            if (!ctx.stream) throw ConfigError("GLA requires a random stream");
            Vector z(out.p.size());
            for (Index i = 0; i < z.size(); ++i) z(i) = ctx.stream->next_normal();
            out.p += noise_factor_ * z;
        }
        // Symplectic Euler on the full (stiff + soft) Hamiltonian.
        out.p += h * (sys_.force(out.q) - keps_ * out.q);
        out.q += h * out.p;
        out.t = x.t + h;
        check_finite(out);
        return out;
    }

  private:
    StiffSystem sys_;
    Matrix keps_;
    Matrix decay_;
    Matrix noise_factor_;
};

class FineSymplecticEulerStepper final : public Stepper {
  public:
    FineSymplecticEulerStepper(const StiffSystem& sys, StepPlan plan)
        : Stepper(std::move(plan)), sys_(sys), keps_(sys.K / sys.eps) {}

    State step(const State& x, NoiseContext&) const override {
        const double h = plan_.macro_step;
        State out = x;
        out.p += h * (sys_.force(out.q) - keps_ * out.q);
        out.q += h * out.p;
        out.t = x.t + h;
        check_finite(out);
        return out;
    }

  private:
    StiffSystem sys_;
    Matrix keps_;
};

class FineEulerMaruyamaStepper final : public Stepper {
  public:
    FineEulerMaruyamaStepper(const StiffSystem& sys, StepPlan plan, const ModalForm& modal)
        : Stepper(std::move(plan)), sys_(sys), keps_(sys.K / sys.eps) {
        if (sys.has_damping()) decay_ = ou_decay(modal, plan_.macro_step);
        sqrt_h_ = std::sqrt(plan_.macro_step);
    }

    State step(const State& x, NoiseContext& ctx) const override {
        const double h = plan_.macro_step;
        State out = x;
        if (decay_.size() > 0) out.p = (decay_ * out.p).eval();
        out.p += h * (sys_.force(out.q) - keps_ * out.q);
        if (sys_.has_noise()) {
            if (ctx.grid) {
                if (ctx.cursor >= ctx.grid->count())
                    throw GridMismatchError("Brownian grid exhausted");
                out.p += sys_.sigma * ctx.grid->increments.col(ctx.cursor);
                ++ctx.cursor;
            } else if (ctx.stream) {
                Vector dw(out.p.size());
                for (Index i = 0; i < dw.size(); ++i)
                    dw(i) = sqrt_h_ * ctx.stream->next_normal();
                out.p += sys_.sigma * dw;
            } else {
                throw ConfigError("stochastic fine reference requires a grid or stream");
            }
        }
        out.q += h * out.p;
        out.t = x.t + h;
        check_finite(out);
        return out;
    }

  private:
    StiffSystem sys_;
    Matrix keps_;
    Matrix decay_;
    double sqrt_h_ = 0.0;
};

void append_substeps(StepPlan& plan) {
    using K = SubStep::Kind;
    const double H = plan.macro_step;
    switch (plan.method) {
        case Method::Sim1Ham:
        case Method::Sim1Lan:
            plan.substeps = {{K::Fast, H}, {K::Slow, H}};
            break;
        case Method::Sim2Lan:
            plan.substeps = {{K::Slow, 0.5 * H}, {K::Fast, H}, {K::Slow, 0.5 * H}};
            break;
        case Method::Sim4Det: {
            const double g = 1.0 / (2.0 - std::cbrt(2.0));
            plan.substeps = {{K::Slow, 0.5 * g * H},         {K::Fast, g * H},
                             {K::Slow, 0.5 * (1 - g) * H},   {K::Fast, (1 - 2 * g) * H},
                             {K::Slow, 0.5 * (1 - g) * H},   {K::Fast, g * H},
                             {K::Slow, 0.5 * g * H}};
            break;
        }
        default:
            plan.substeps.clear();
            return;
    }
    double fast = 0.0, slow = 0.0;
    for (const auto& s : plan.substeps)
        (s.kind == K::Fast ? fast : slow) += s.duration;
    if (std::abs(fast - H) > 1e-12 * std::abs(H) || std::abs(slow - H) > 1e-12 * std::abs(H))
        throw ConfigError("splitting substeps do not sum to the macro step");
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::Sim1Ham: return "sim1-ham";
        case Method::Sim1Lan: return "sim1-lan";
        case Method::Sim2Lan: return "sim2-lan";
        case Method::Sim4Det: return "sim4-det";
        case Method::Gla1: return "gla1";
        case Method::FineSymplecticEuler: return "fine-symplectic-euler";
        case Method::FineEulerMaruyama: return "fine-euler-maruyama";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    for (Method m : {Method::Sim1Ham, Method::Sim1Lan, Method::Sim2Lan, Method::Sim4Det,
                     Method::Gla1, Method::FineSymplecticEuler, Method::FineEulerMaruyama})
        if (method_name(m) == name) return m;
    throw UnknownMethodError(name);
}

StepPlan make_step_plan(Method method, double H, NoiseMode mode, double coupling_fine_h) {
    if (!(H > 0.0)) throw ConfigError("macro step must be positive");
    StepPlan plan;
    plan.method = method;
    plan.macro_step = H;
    plan.noise_mode = mode;
    plan.coupling_fine_h = coupling_fine_h;
    if (mode == NoiseMode::PathCoupled && !(coupling_fine_h > 0.0))
        throw ConfigError("path-coupled plans need a fine grid spacing");
    append_substeps(plan);
    return plan;
}

std::unique_ptr<Stepper> make_stepper(const StiffSystem& sys, const StepPlan& plan) {
    if (!sys.validated) throw ConfigError("make_stepper requires a validated system");
    if (!sys.unit_mass()) throw ConfigError("make_stepper requires the unit-mass form");
    const ModalForm modal = modal_decompose(sys);
    switch (plan.method) {
        case Method::Sim1Ham:
            require_deterministic(sys);
            return std::make_unique<Sim1HamStepper>(sys, plan, modal);
        case Method::Sim1Lan:
            return std::make_unique<Sim1LanStepper>(sys, plan, modal,
                                                    make_kick_provider(sys, modal, plan));
        case Method::Sim2Lan:
            return std::make_unique<Sim2LanStepper>(sys, plan, modal,
                                                    make_kick_provider(sys, modal, plan));
        case Method::Sim4Det:
            require_deterministic(sys);
            return std::make_unique<Sim4DetStepper>(sys, plan, modal);
        case Method::Gla1:
            return std::make_unique<Gla1Stepper>(sys, plan, modal);
        case Method::FineSymplecticEuler:
            require_deterministic(sys);
            return std::make_unique<FineSymplecticEulerStepper>(sys, plan);
        case Method::FineEulerMaruyama:
            return std::make_unique<FineEulerMaruyamaStepper>(sys, plan, modal);
    }
    throw ConfigError("unhandled method");
}

std::unique_ptr<Stepper> make_frozen_kick_stepper(const StiffSystem& sys, Method method,
                                                  double H, const Kick& kick) {
    const ModalForm modal = modal_decompose(sys);
    StepPlan plan = make_step_plan(method, H, NoiseMode::None);
    if (method == Method::Sim1Lan)
        return std::make_unique<Sim1LanStepper>(sys, plan, modal, kick);
    if (method == Method::Sim2Lan)
        return std::make_unique<Sim2LanStepper>(sys, plan, modal, kick);
    throw ConfigError("frozen-kick steppers exist only for the SIM Langevin methods");
}

State integrate(const Stepper& stepper, State initial, double T, const Recorder& recorder,
                NoiseContext* ctx, const IntegrateOptions& opts) {
    const double H = stepper.macro_step();
    const long n = std::llround(T / H);
    NoiseContext local;
    NoiseContext& c = ctx ? *ctx : local;

    check_finite(initial);
    if (recorder) recorder(0, initial);
    State state = std::move(initial);
    const double t0 = state.t;
    for (long k = 1; k <= n; ++k) {
        state = stepper.step(state, c);
        state.t = t0 + static_cast<double>(k) * H;
        const double norm = std::sqrt(state.q.squaredNorm() + state.p.squaredNorm());
        if (!std::isfinite(norm) || norm > opts.blowup_threshold) throw BlowUpError(k, norm);
        if (recorder) recorder(k, state);
    }
    return state;
}

}  // namespace stiffsim
