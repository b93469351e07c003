#include "stiffsim/fastflow.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>

#include "stiffsim/errors.hpp"
#include "stiffsim/noise.hpp"

namespace stiffsim {

namespace {

constexpr double kCriticalBand = 1e-6;  // |zeta - 1| below this takes the critical branch

// 16-point Gauss-Legendre rule on [-1, 1], nodes by Newton iteration on the
// Legendre recurrence.
struct GaussRule {
    std::array<double, 16> x{};
    std::array<double, 16> w{};

    GaussRule() {
        constexpr int n = 16;
        for (int k = 0; k < n; ++k) {
            double xk = std::cos(M_PI * (k + 0.75) / (n + 0.5));
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = xk;
                for (int j = 2; j <= n; ++j) {
                    double p2 = ((2.0 * j - 1.0) * xk * p1 - (j - 1.0) * p0) / j;
                    p0 = p1;
                    p1 = p2;
                }
                const double dp = n * (xk * p1 - p0) / (xk * xk - 1.0);
                const double dx = p1 / dp;
                xk -= dx;
                if (std::abs(dx) < 1e-15) break;
            }
            double p0 = 1.0, p1 = xk;
            for (int j = 2; j <= n; ++j) {
                double p2 = ((2.0 * j - 1.0) * xk * p1 - (j - 1.0) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            const double dp = n * (xk * p1 - p0) / (xk * xk - 1.0);
            x[k] = xk;
            w[k] = 2.0 / ((1.0 - xk * xk) * dp * dp);
        }
    }
};

const GaussRule& gauss16() {
    static const GaussRule rule;
    return rule;
}

// Fills nodes/weights of the composite 16-point rule with `panels` panels on [0, H].
void composite_nodes(double H, Index panels, Vector& nodes, Vector& weights) {
    const auto& rule = gauss16();
    const double len = H / static_cast<double>(panels);
    nodes.resize(panels * 16);
    weights.resize(panels * 16);
    for (Index p = 0; p < panels; ++p) {
        const double a = len * static_cast<double>(p);
        const double mid = a + 0.5 * len;
        for (int k = 0; k < 16; ++k) {
            nodes(p * 16 + k) = mid + 0.5 * len * rule.x[k];
            weights(p * 16 + k) = 0.5 * len * rule.w[k];
        }
    }
}

// Modal b12/b22 values at the given times, one row per mode.
void eval_modal_blocks(const ModalForm& modal, const Vector& times, Matrix& b12, Matrix& b22) {
    const Index d = modal.dim();
    b12.resize(d, times.size());
    b22.resize(d, times.size());
    for (Index i = 0; i < d; ++i) {
        for (Index k = 0; k < times.size(); ++k) {
            const ScalarBlocks b = scalar_damped_blocks(modal.omega(i), modal.damp(i), times(k));
            b12(i, k) = b.b12;
            b22(i, k) = b.b22;
        }
    }
}

Matrix rotate_back(const Matrix& U, const Matrix& modal_block) {
    return U * modal_block * U.transpose();
}

}  // namespace

ScalarBlocks scalar_damped_blocks(double omega, double c, double s) {
    if (omega == 0.0) {
        // Free mode: qdd = -c qd.
        if (c == 0.0) return {1.0, s, 0.0, 1.0};
        const double decay = std::exp(-c * s);
        return {1.0, -std::expm1(-c * s) / c, 0.0, decay};
    }
    const double zeta = c / (2.0 * omega);
    if (std::abs(zeta - 1.0) <= kCriticalBand) {
        // Critical damping, double root at -omega.
        const double decay = std::exp(-omega * s);
        return {decay * (1.0 + omega * s), decay * s, -omega * omega * s * decay,
                decay * (1.0 - omega * s)};
    }
    if (zeta < 1.0) {
        const double root = std::sqrt(1.0 - zeta * zeta);
        const double wd = omega * root;  // damped frequency
        const double decay = std::exp(-zeta * omega * s);
        const double sn = std::sin(wd * s);
        const double cs = std::cos(wd * s);
        return {decay * (cs + zeta / root * sn), decay * sn / wd, -omega / root * decay * sn,
                decay * (cs - zeta / root * sn)};
    }
    // Overdamped: roots r- = -omega (zeta + g), r+ = -omega / (zeta + g).
    const double g = std::sqrt(zeta * zeta - 1.0);
    const double ea = std::exp(-omega * (zeta + g) * s);       // slower-decaying at s < 0
    const double eb = std::exp(-omega / (zeta + g) * s);
    return {(zeta * (eb - ea) + g * (ea + eb)) / (2.0 * g), (eb - ea) / (2.0 * omega * g),
            omega * (ea - eb) / (2.0 * g), (zeta * (ea - eb) + g * (ea + eb)) / (2.0 * g)};
}

State Propagator::apply(const State& x) const {
    State out;
    out.q = B11 * x.q + B12 * x.p;
    out.p = B21 * x.q + B22 * x.p;
    out.t = x.t + s;
    return out;
}

void Propagator::apply(const Vector& q, const Vector& p, Vector& q_out, Vector& p_out) const {
    q_out = B11 * q + B12 * p;
    p_out = B21 * q + B22 * p;
}

Matrix Propagator::dense() const {
    const Index d = dim();
    Matrix full(2 * d, 2 * d);
    full.topLeftCorner(d, d) = B11;
    full.topRightCorner(d, d) = B12;
    full.bottomLeftCorner(d, d) = B21;
    full.bottomRightCorner(d, d) = B22;
    return full;
}

ModalForm modal_decompose(const StiffSystem& sys, double tol_offdiag) {
    if (!sys.validated) throw ConfigError("modal_decompose requires a validated system");
    if (!sys.unit_mass()) throw ConfigError("modal_decompose requires the unit-mass form");

    const Index d = sys.dim;
    Eigen::SelfAdjointEigenSolver<Matrix> ek(sys.K);
    Vector lambda = ek.eigenvalues();
    Matrix U = ek.eigenvectors();

    const double k_scale = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
    for (Index i = 0; i < d; ++i) {
        if (lambda(i) < -1e-12 * k_scale) throw NotPsdError("K", lambda(i));
        if (lambda(i) <= 1e-13 * k_scale) {
            if (sys.zero_mode_policy == ZeroModePolicy::Reject) throw NotSpdError("K", lambda(i));
            lambda(i) = 0.0;
        }
    }

    // Within each eigenvalue cluster of K the basis is free; rotate it so the
    // damping block becomes diagonal there too.
    const bool damped = sys.has_damping();
    if (damped) {
        Index start = 0;
        while (start < d) {
            Index end = start + 1;
            while (end < d && std::abs(lambda(end) - lambda(start)) <= 1e-9 * k_scale) ++end;
            if (end - start > 1) {
                const Matrix block =
                    U.middleCols(start, end - start).transpose() * sys.c * U.middleCols(start, end - start);
                Eigen::SelfAdjointEigenSolver<Matrix> ec(0.5 * (block + block.transpose()));
                U.middleCols(start, end - start) =
                    (U.middleCols(start, end - start) * ec.eigenvectors()).eval();
            }
            start = end;
        }
    }

    ModalForm modal;
    modal.U = U;
    modal.eps = sys.eps;
    modal.omega = (lambda / sys.eps).cwiseSqrt();
    modal.damp = Vector::Zero(d);
    modal.zeta = Vector::Zero(d);
    if (damped) {
        const Matrix c_modal = U.transpose() * sys.c * U;
        const double c_scale = std::max(c_modal.cwiseAbs().maxCoeff(), 1e-300);
        const Matrix offdiag = c_modal - Matrix(c_modal.diagonal().asDiagonal());
        const double off = offdiag.norm() / std::max(c_modal.norm(), c_scale);
        if (off > tol_offdiag) throw SimultaneousDiagonalizationError(off);
        modal.damp = c_modal.diagonal();
        for (Index i = 0; i < d; ++i) {
            if (modal.damp(i) < 0.0 && modal.damp(i) > -1e-12 * c_scale) modal.damp(i) = 0.0;
            if (modal.omega(i) > 0.0) modal.zeta(i) = modal.damp(i) / (2.0 * modal.omega(i));
        }
    }
    return modal;
}

Propagator assemble_propagator(const ModalForm& modal, double s) {
    const Index d = modal.dim();
    Vector b11(d), b12(d), b21(d), b22(d);
    for (Index i = 0; i < d; ++i) {
        const ScalarBlocks b = scalar_damped_blocks(modal.omega(i), modal.damp(i), s);
        b11(i) = b.b11;
        b12(i) = b.b12;
        b21(i) = b.b21;
        b22(i) = b.b22;
    }
    Propagator prop;
    prop.s = s;
    prop.B11 = rotate_back(modal.U, b11.asDiagonal());
    prop.B12 = rotate_back(modal.U, b12.asDiagonal());
    prop.B21 = rotate_back(modal.U, b21.asDiagonal());
    prop.B22 = rotate_back(modal.U, b22.asDiagonal());
    return prop;
}

KickCovariance kick_covariance(const ModalForm& modal, const Matrix& sigma, double H) {
    if (!(H > 0.0)) throw ConfigError("kick_covariance requires H > 0");
    const Index d = modal.dim();
    if (sigma.rows() != d || sigma.cols() != d)
        throw DimensionMismatchError("sigma must match the system dimension");

    KickCovariance cov;
    cov.H = H;
    if (sigma.cwiseAbs().maxCoeff() == 0.0) {
        cov.sigma2 = Matrix::Zero(2 * d, 2 * d);
        cov.factor = Matrix::Zero(2 * d, 2 * d);
        return cov;
    }

    // Modal form: with S = (U^T sigma)(U^T sigma)^T the blocks are Hadamard
    // products of S with matrices of scalar integrals of b12_i b12_j etc.
    const Matrix ut_sigma = modal.U.transpose() * sigma;
    const Matrix S = ut_sigma * ut_sigma.transpose();

    const double rate = (modal.omega + modal.damp).maxCoeff();
    Index panels = std::max<Index>(2, static_cast<Index>(std::ceil(rate * H / (4.0 * M_PI))));
    const double tol = 0.25 * 1e-13 * std::max(H, H * H * H);

    Matrix i1212, i1222, i2222;
    bool converged = false;
    double achieved = std::numeric_limits<double>::infinity();
    Vector nodes, weights;
    Matrix b12, b22;
    for (int level = 0; level < 18; ++level, panels *= 2) {
        composite_nodes(H, panels, nodes, weights);
        eval_modal_blocks(modal, nodes, b12, b22);
        const Matrix wb12 = b12 * weights.asDiagonal();
        Matrix n1212 = wb12 * b12.transpose();
        Matrix n1222 = wb12 * b22.transpose();
        Matrix n2222 = (b22 * weights.asDiagonal()) * b22.transpose();
        if (level > 0) {
            achieved = std::max({(n1212 - i1212).cwiseAbs().maxCoeff(),
                                 (n1222 - i1222).cwiseAbs().maxCoeff(),
                                 (n2222 - i2222).cwiseAbs().maxCoeff()});
            if (achieved <= tol) {
                i1212 = std::move(n1212);
                i1222 = std::move(n1222);
                i2222 = std::move(n2222);
                converged = true;
                break;
            }
        }
        i1212 = std::move(n1212);
        i1222 = std::move(n1222);
        i2222 = std::move(n2222);
    }
    if (!converged) throw QuadratureNonConvergenceError(achieved, tol);

    const Matrix s11 = rotate_back(modal.U, S.cwiseProduct(i1212));
    const Matrix s12 = rotate_back(modal.U, S.cwiseProduct(i1222));
    const Matrix s22 = rotate_back(modal.U, S.cwiseProduct(i2222));

    cov.sigma2.resize(2 * d, 2 * d);
    cov.sigma2.topLeftCorner(d, d) = s11;
    cov.sigma2.topRightCorner(d, d) = s12;
    cov.sigma2.bottomLeftCorner(d, d) = s12.transpose();
    cov.sigma2.bottomRightCorner(d, d) = s22;
    cov.sigma2 = (0.5 * (cov.sigma2 + cov.sigma2.transpose())).eval();

    // Spectral factorization; tiny negative eigenvalues from roundoff are
    // clamped so nearly singular covariances (small H) still factor.
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov.sigma2);
    const Vector clamped = es.eigenvalues().cwiseMax(0.0);
    cov.factor = es.eigenvectors() * clamped.cwiseSqrt().asDiagonal() *
                 es.eigenvectors().transpose();
    return cov;
}

Kick sample_kick(const KickCovariance& cov, PathStream& stream) {
    const Index d = cov.dim();
    Vector z(2 * d);
    for (Index i = 0; i < 2 * d; ++i) z(i) = stream.next_normal();
    const Vector gz = cov.factor * z;
    return {gz.head(d), gz.tail(d)};
}

Kick coupled_kick_from_increments(const ModalForm& modal, const Matrix& sigma, double H,
                                  const std::vector<std::pair<double, Vector>>& increments) {
    const Index d = modal.dim();
    double span = 0.0;
    for (const auto& [dt, dw] : increments) span += dt;
    if (std::abs(span - H) > 1e-9 * std::max(1.0, std::abs(H)))
        throw PathMismatchError(span, H);

    const Matrix ut_sigma = modal.U.transpose() * sigma;
    Vector rq = Vector::Zero(d), rp = Vector::Zero(d);
    double left = 0.0;
    for (const auto& [dt, dw] : increments) {
        const Vector v = ut_sigma * dw;
        const double remain = H - left;
        for (Index i = 0; i < d; ++i) {
            const ScalarBlocks b = scalar_damped_blocks(modal.omega(i), modal.damp(i), remain);
            rq(i) += b.b12 * v(i);
            rp(i) += b.b22 * v(i);
        }
        left += dt;
    }
    return {modal.U * rq, modal.U * rp};
}

CoupledKickAggregator::CoupledKickAggregator(const ModalForm& modal, const Matrix& sigma,
                                             double H, double h)
    : H_(H), h_(h), U_(modal.U), ut_sigma_(modal.U.transpose() * sigma) {
    const double ratio = H / h;
    n_ = static_cast<Index>(std::llround(ratio));
    if (n_ < 1 || std::abs(ratio - static_cast<double>(n_)) > 1e-9)
        throw GridNestingError("fine step must divide the macro step");
    const Index d = modal.dim();
    b12_.resize(d, n_);
    b22_.resize(d, n_);
    for (Index j = 0; j < n_; ++j) {
        const double remain = H - static_cast<double>(j) * h;
        for (Index i = 0; i < d; ++i) {
            const ScalarBlocks b = scalar_damped_blocks(modal.omega(i), modal.damp(i), remain);
            b12_(i, j) = b.b12;
            b22_(i, j) = b.b22;
        }
    }
}

Kick CoupledKickAggregator::aggregate(const Eigen::Ref<const Matrix>& increments) const {
    if (increments.cols() != n_ || increments.rows() != ut_sigma_.cols())
        throw DimensionMismatchError("increment block does not match the aggregation table");
    const Matrix v = ut_sigma_ * increments;  // d x n modal noise
    const Vector rq = b12_.cwiseProduct(v).rowwise().sum();
    const Vector rp = b22_.cwiseProduct(v).rowwise().sum();
    return {U_ * rq, U_ * rp};
}

PropagatorTimeIntegral propagator_time_integral(const ModalForm& modal, double H) {
    if (!(H > 0.0)) throw ConfigError("propagator_time_integral requires H > 0");
    const Index d = modal.dim();

    const double rate = (modal.omega + modal.damp).maxCoeff();
    Index panels = std::max<Index>(2, static_cast<Index>(std::ceil(rate * H / (4.0 * M_PI))));
    const double tol = 0.25 * 1e-13 * std::max(H, H * H);

    Vector i12, i22;
    bool converged = false;
    double achieved = std::numeric_limits<double>::infinity();
    Vector nodes, weights;
    Matrix b12, b22;
    for (int level = 0; level < 18; ++level, panels *= 2) {
        composite_nodes(H, panels, nodes, weights);
        eval_modal_blocks(modal, nodes, b12, b22);
        Vector n12 = b12 * weights;
        Vector n22 = b22 * weights;
        if (level > 0) {
            achieved = std::max((n12 - i12).cwiseAbs().maxCoeff(),
                                (n22 - i22).cwiseAbs().maxCoeff());
            if (achieved <= tol) {
                i12 = std::move(n12);
                i22 = std::move(n22);
                converged = true;
                break;
            }
        }
        i12 = std::move(n12);
        i22 = std::move(n22);
    }
    if (!converged) throw QuadratureNonConvergenceError(achieved, tol);

    PropagatorTimeIntegral out;
    out.H = H;
    out.S12 = rotate_back(modal.U, i12.asDiagonal());
    out.S22 = rotate_back(modal.U, i22.asDiagonal());
    return out;
}

}  // namespace stiffsim
