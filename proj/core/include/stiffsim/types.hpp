#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>

namespace stiffsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Phase-space point (q, p) at time t.
struct State {
    Vector q;
    Vector p;
    double t = 0.0;

    Index dim() const { return q.size(); }
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const State& s) { return s.q.allFinite() && s.p.allFinite(); }

/// Soft force F(q); equals -grad V(q) for mechanical systems but may be any
/// smooth vector field.
using ForceFn = std::function<Vector(const Vector&)>;

/// Soft potential V(q), used only for energy diagnostics.
using PotentialFn = std::function<double(const Vector&)>;

}  // namespace stiffsim
