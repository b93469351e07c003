#include "stiffsim/model.hpp"

#include <Eigen/Eigenvalues>

#include "stiffsim/errors.hpp"

namespace stiffsim {

namespace {

void require_square(const Matrix& m, Index d, const char* name) {
    if (m.rows() != d || m.cols() != d)
        throw DimensionMismatchError(std::string(name) + " must be " + std::to_string(d) + "x" +
                                     std::to_string(d));
}

double symmetry_defect(const Matrix& m) {
    double scale = m.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

double min_eigenvalue_sym(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return m.jacobiSvd().singularValues()(0);
}

}  // namespace

State MassTransform::to_unit_mass(const State& s) const {
    if (is_identity) return s;
    return State{sqrt_m * s.q, inv_sqrt_m * s.p, s.t};
}

State MassTransform::from_unit_mass(const State& s) const {
    if (is_identity) return s;
    return State{inv_sqrt_m * s.q, sqrt_m * s.p, s.t};
}

StiffSystem make_isotropic_system(Index dim, Matrix K, double eps, double damping, double noise,
                                  ForceFn force, PotentialFn potential) {
    StiffSystem sys;
    sys.dim = dim;
    sys.M = Matrix::Identity(dim, dim);
    sys.K = std::move(K);
    sys.eps = eps;
    sys.c = damping * Matrix::Identity(dim, dim);
    sys.sigma = noise * Matrix::Identity(dim, dim);
    sys.soft_force = std::move(force);
    sys.soft_potential = std::move(potential);
    return sys;
}

StiffSystem validate_system(StiffSystem sys, double tol_commute) {
    const Index d = sys.dim;
    if (d <= 0) throw ConfigError("system dimension must be positive");
    require_square(sys.M, d, "M");
    require_square(sys.K, d, "K");
    require_square(sys.c, d, "c");
    require_square(sys.sigma, d, "sigma");
    if (!(sys.eps > 0.0)) throw ConfigError("eps must be positive");

    const double sym_tol = 1e-12;
    if (symmetry_defect(sys.K) > sym_tol) throw NotSpdError("K", std::nan(""));
    if (symmetry_defect(sys.M) > sym_tol) throw NotSpdError("M", std::nan(""));
    if (symmetry_defect(sys.c) > sym_tol) throw NotPsdError("c", std::nan(""));

    const double k_scale = std::max(sys.K.cwiseAbs().maxCoeff(), 1e-300);
    const double lambda_min_k = min_eigenvalue_sym(sys.K);
    if (sys.zero_mode_policy == ZeroModePolicy::Reject) {
        if (lambda_min_k <= k_scale * 1e-14) throw NotSpdError("K", lambda_min_k);
    } else {
        if (lambda_min_k < -k_scale * 1e-12) throw NotPsdError("K", lambda_min_k);
    }

    const double lambda_min_m = min_eigenvalue_sym(sys.M);
    if (lambda_min_m <= 0.0) throw NotSpdError("M", lambda_min_m);

    if (sys.c.cwiseAbs().maxCoeff() > 0.0) {
        const double lambda_min_c = min_eigenvalue_sym(sys.c);
        if (lambda_min_c < -1e-12 * sys.c.cwiseAbs().maxCoeff())
            throw NotPsdError("c", lambda_min_c);
    }

    // Condition: K and c commute.
    const double nk = spectral_norm(sys.K);
    const double nc = spectral_norm(sys.c);
    double defect = 0.0;
    if (nk > 0.0 && nc > 0.0) {
        defect = spectral_norm(sys.K * sys.c - sys.c * sys.K) / (nk * nc);
        if (defect > tol_commute) throw CommutationViolationError(defect);
    }

    sys.commutation_defect = defect;
    sys.validated = true;
    return sys;
}

std::pair<StiffSystem, MassTransform> mass_weighted_form(const StiffSystem& sys) {
    if (!sys.validated) throw ConfigError("mass_weighted_form requires a validated system");

    MassTransform tf;
    if (sys.unit_mass()) {
        tf.is_identity = true;
        tf.sqrt_m = Matrix::Identity(sys.dim, sys.dim);
        tf.inv_sqrt_m = tf.sqrt_m;
        return {sys, tf};
    }

    Eigen::SelfAdjointEigenSolver<Matrix> es(sys.M);
    if (es.eigenvalues().minCoeff() <= 0.0) throw NotSpdError("M", es.eigenvalues().minCoeff());
    const Vector sqrt_ev = es.eigenvalues().cwiseSqrt();
    tf.sqrt_m = es.eigenvectors() * sqrt_ev.asDiagonal() * es.eigenvectors().transpose();
    tf.inv_sqrt_m =
        es.eigenvectors() * sqrt_ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    tf.is_identity = false;

    StiffSystem out = sys;
    out.M = Matrix::Identity(sys.dim, sys.dim);
    out.K = tf.inv_sqrt_m * sys.K * tf.inv_sqrt_m;
    out.K = 0.5 * (out.K + out.K.transpose()).eval();
    // Friction acts on momentum, so it transforms by similarity rather than
    // congruence; symmetry survives only when c and M commute.
    out.c = tf.inv_sqrt_m * sys.c * tf.sqrt_m;
    const double c_scale = out.c.cwiseAbs().maxCoeff();
    if (c_scale > 0.0 &&
        (out.c - out.c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * c_scale) {
        throw CommutationViolationError(
            (out.c - out.c.transpose()).cwiseAbs().maxCoeff() / c_scale);
    }
    out.c = 0.5 * (out.c + out.c.transpose()).eval();
    out.sigma = tf.inv_sqrt_m * sys.sigma;

    const Matrix back = tf.inv_sqrt_m;
    if (sys.soft_force) {
        ForceFn f = sys.soft_force;
        out.soft_force = [f, back](const Vector& q) -> Vector { return back * f(back * q); };
    }
    if (sys.soft_potential) {
        PotentialFn v = sys.soft_potential;
        out.soft_potential = [v, back](const Vector& q) -> double { return v(back * q); };
    }

    out.validated = false;
    out = validate_system(std::move(out));
    return {out, tf};
}

}  // namespace stiffsim
