#pragma once

#include <utility>
#include <vector>

#include "stiffsim/model.hpp"
#include "stiffsim/types.hpp"

namespace stiffsim {

class PathStream;

/// Simultaneous diagonalization of the (unit-mass) stiffness and damping:
/// U orthogonal with U^T K U and U^T c U diagonal. Per mode i the fast flow
/// is a damped harmonic oscillator with stiff frequency omega_i =
/// sqrt(lambda_i(K)/eps) and damping rate damp_i, so the mode ODE is
/// qdd + damp_i qd + omega_i^2 q = 0. zeta_i = damp_i / (2 omega_i)
/// classifies the under/critical/overdamped branches. omega_i == 0 marks a
/// zero-frequency free mode (ZeroModePolicy::Extend only).
struct ModalForm {
    Matrix U;
    Vector omega;
    Vector damp;
    Vector zeta;
    double eps = 1.0;

    Index dim() const { return omega.size(); }
    bool has_zero_modes() const { return omega.minCoeff() == 0.0; }
};

/// Entries of the 2x2 flow of qdd + c qd + omega^2 q = 0 over time s:
/// (q(s), p(s)) = (b11 q0 + b12 p0, b21 q0 + b22 p0).
struct ScalarBlocks {
    double b11, b12, b21, b22;
};

/// Exact scalar damped-oscillator propagator. Total for omega >= 0, c >= 0
/// and any s; omega == 0 uses the analytic free-mode limit. The critical
/// branch is taken when |zeta - 1| <= 1e-6.
ScalarBlocks scalar_damped_blocks(double omega, double c, double s);

/// Block matrix B(s) = exp(s [[0, I], [-eps^{-1} K, -c]]) realizing the exact
/// fast flow, assembled mode-by-mode and rotated back by U.
struct Propagator {
    double s = 0.0;
    Matrix B11, B12, B21, B22;

    Index dim() const { return B11.rows(); }
    State apply(const State& x) const;
    void apply(const Vector& q, const Vector& p, Vector& q_out, Vector& p_out) const;
    Matrix dense() const;  // 2d x 2d block matrix
};

ModalForm modal_decompose(const StiffSystem& unit_sys, double tol_offdiag = 1e-10);
Propagator assemble_propagator(const ModalForm& modal, double s);

/// Covariance of the Gaussian kick (Rq, Rp) = int_0^H B(H-s) (0, sigma dW_s):
/// the four blocks int_0^H B_a(u) sigma sigma^T B_b(u)^T du for a, b in
/// {12, 22}, with a positive semi-definite factor G (G G^T = Sigma2) for
/// sampling.
struct KickCovariance {
    double H = 0.0;
    Matrix sigma2;  // 2d x 2d, symmetric PSD
    Matrix factor;  // 2d x 2d

    Index dim() const { return sigma2.rows() / 2; }
    bool is_zero() const { return sigma2.size() == 0 || sigma2.cwiseAbs().maxCoeff() == 0.0; }
};

/// Computes the kick covariance by adaptive Gauss-Legendre quadrature of the
/// block integrands to absolute tolerance ~1e-13 ||sigma||_2^2 max(H, H^3),
/// then factors it spectrally with negative eigenvalues clamped to zero.
/// Throws QuadratureNonConvergenceError if refinement stalls.
KickCovariance kick_covariance(const ModalForm& modal, const Matrix& sigma, double H);

struct Kick {
    Vector rq, rp;
};

/// Draws (Rq, Rp) = G z with z standard normal of dimension 2d.
Kick sample_kick(const KickCovariance& cov, PathStream& stream);

/// Left-point Ito Riemann approximation sum_j B(H - s_j) (0, sigma dW_j) of
/// the exact kick, driven by explicit Brownian increments so that a SIM step
/// and a fine reference integrator can share one path. Increments must span
/// H (PathMismatchError otherwise).
Kick coupled_kick_from_increments(const ModalForm& modal, const Matrix& sigma, double H,
                                  const std::vector<std::pair<double, Vector>>& increments);

/// Precomputed aggregation table for coupled kicks on a uniform fine grid:
/// n = H/h increments per macro step, propagators B(H - j h) cached once.
class CoupledKickAggregator {
  public:
    CoupledKickAggregator(const ModalForm& modal, const Matrix& sigma, double H, double h);

    /// increments: d x n matrix of Brownian increments for one macro step.
    Kick aggregate(const Eigen::Ref<const Matrix>& increments) const;

    Index substeps() const { return n_; }
    double macro_step() const { return H_; }
    double fine_step() const { return h_; }

  private:
    Index n_;
    double H_, h_;
    Matrix U_;          // modal rotation
    Matrix ut_sigma_;   // U^T sigma
    Matrix b12_, b22_;  // d x n modal block coefficients at H - j h
};

/// Time integral int_0^H B(s) ds of the propagator blocks that multiply a
/// constant momentum forcing: S12 = int B_12(s) ds, S22 = int B_22(s) ds.
/// Used by the bridge dynamics, computed with the same quadrature machinery
/// as the kick covariance.
struct PropagatorTimeIntegral {
    double H = 0.0;
    Matrix S12, S22;
};

PropagatorTimeIntegral propagator_time_integral(const ModalForm& modal, double H);

}  // namespace stiffsim
