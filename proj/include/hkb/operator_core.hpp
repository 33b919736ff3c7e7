#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace hkb {

/// Point z = (x, y) of the half-space R^N x (0, infinity).
struct Point {
    Eigen::VectorXd x;
    double y = 1.0;

    Point() = default;
    Point(Eigen::VectorXd x_, double y_) : x(std::move(x_)), y(y_) {}
    /// Convenience for N = 1.
    static Point planar(double x, double y) {
        Eigen::VectorXd v(1);
        v(0) = x;
        return {v, y};
    }
    int dim() const { return static_cast<int>(x.size()); }
};

inline double distance_squared(const Point& a, const Point& b) {
    if (a.x.size() != b.x.size()) throw StructuralError("points of different dimension");
    const double dy = a.y - b.y;
    return (a.x - b.x).squaredNorm() + dy * dy;
}

/// Coefficients of Tr(A D^2) + (v . grad)/y with A = [[Q, q], [q^T, gamma]] and v = (d, c).
struct GeneralOperatorSpec {
    int N = 1;
    Eigen::MatrixXd A;
    Eigen::VectorXd d;
    double c = 0.0;

    Eigen::MatrixXd Q() const { return A.topLeftCorner(N, N); }
    Eigen::VectorXd q() const { return A.topRightCorner(N, 1); }
    double gamma() const { return A(N, N); }
};

/// Delta_x + 2 a . grad_x D_y + D_yy + (c/y) D_y.
struct ModelOperatorSpec {
    int N = 1;
    Eigen::VectorXd a;
    double c = 0.0;

    static ModelOperatorSpec planar(double a, double c) {
        ModelOperatorSpec m;
        m.N = 1;
        m.a = Eigen::VectorXd::Constant(1, a);
        m.c = c;
        return m;
    }
    bool commuting() const { return a.size() == 0 || a.isZero(0.0); }
};

struct ValidationReport {
    bool pass = true;
    std::vector<std::string> violations;
    double min_eigenvalue = 0.0;
    double max_eigenvalue = 0.0;
    double degeneracy_margin = 0.0;  // c/gamma + 1
    bool symmetric = true;
    bool positive_definite = true;
    bool oblique = true;
    bool admissible = true;
};

namespace detail {
inline void check_shape(const GeneralOperatorSpec& s) {
    if (s.N < 1) throw StructuralError("N must be a positive integer");
    if (s.A.rows() != s.N + 1 || s.A.cols() != s.N + 1)
        throw StructuralError("A must be (N+1)x(N+1)");
    if (s.d.size() != s.N) throw StructuralError("d must have N entries");
}
constexpr double pd_relative_tolerance = 1e-10;
} // namespace detail

inline ValidationReport validate_general(const GeneralOperatorSpec& spec) {
    detail::check_shape(spec);
    ValidationReport r;
    const int n = spec.N + 1;
    for (int i = 0; i < n && r.symmetric; ++i)
        for (int j = 0; j < n; ++j)
            if (spec.A(i, j) != spec.A(j, i)) {
                r.symmetric = false;
                break;
            }
    if (!r.symmetric) r.violations.push_back("symmetric: A_ij != A_ji");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (spec.A + spec.A.transpose()), Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    r.max_eigenvalue = es.eigenvalues().maxCoeff();
    r.positive_definite = r.min_eigenvalue > 0.0 && r.min_eigenvalue > detail::pd_relative_tolerance * r.max_eigenvalue;
    if (!r.positive_definite) r.violations.push_back("positive_definite: smallest eigenvalue " + std::to_string(r.min_eigenvalue));

    r.oblique = !(spec.c == 0.0 && !spec.d.isZero(0.0));
    if (!r.oblique) r.violations.push_back("oblique: d != 0 while c = 0");

    const double g = spec.gamma();
    r.degeneracy_margin = g > 0.0 ? spec.c / g + 1.0 : -std::numeric_limits<double>::infinity();
    r.admissible = r.degeneracy_margin > 0.0;
    if (!r.admissible) r.violations.push_back("admissible: c/gamma + 1 = " + std::to_string(r.degeneracy_margin));

    r.pass = r.violations.empty();
    return r;
}

inline void validate_model(const ModelOperatorSpec& m) {
    if (m.N < 1 || m.a.size() != m.N) throw StructuralError("model: a must have N entries");
    if (!(m.a.norm() < 1.0)) throw ParameterError("model: |a| < 1 required");
    if (!(m.c + 1.0 > 0.0)) throw ParameterError("model: c + 1 > 0 required");
}

struct ShearResult {
    Eigen::MatrixXd tilde_A;
    double c = 0.0;
};

/// Conjugation by T u(x, y) = u(x - (d/c) y, y), which turns the drift into c D_y / y.
/// The x-block is returned in its symmetric form Q - (d q^T + q d^T)/c + (gamma/c^2) d d^T.
inline ShearResult shear_transform(const GeneralOperatorSpec& spec) {
    detail::check_shape(spec);
    if (spec.c == 0.0) {
        if (!spec.d.isZero(0.0)) throw InvalidSpecError("shear_transform: d != 0 with c = 0");
        return {spec.A, 0.0};
    }
    const int N = spec.N;
    const double c = spec.c;
    const double g = spec.gamma();
    const Eigen::VectorXd q = spec.q();
    const Eigen::VectorXd& d = spec.d;
    Eigen::MatrixXd T(N + 1, N + 1);
    const Eigen::MatrixXd B = spec.Q() - (d * q.transpose() + q * d.transpose()) / c + (g / (c * c)) * d * d.transpose();
    // symmetric in exact arithmetic; rounding (and a one-ulp asymmetric input) must not leak into T
    T.topLeftCorner(N, N) = 0.5 * (B + B.transpose());
    const Eigen::VectorXd qt = q - (g / c) * d;
    T.topRightCorner(N, 1) = qt;
    T.bottomLeftCorner(1, N) = qt.transpose();
    T(N, N) = g;
    return {T, c};
}

struct ReductionResult {
    ModelOperatorSpec model;
    std::optional<Eigen::VectorXd> shear;  // d/c; absent when c = 0
    Eigen::MatrixXd x_change;              // M with M Q~ M^T = gamma I
    double time_scale = 1.0;               // gamma
    Eigen::MatrixXd tilde_A;
    double general_c = 0.0;                // c of the general operator

    int N() const { return model.N; }
    double det_M() const { return x_change.determinant(); }
};

inline ReductionResult reduce_to_model(const GeneralOperatorSpec& spec) {
    const ValidationReport v = validate_general(spec);
    if (!v.pass) throw InvalidSpecError("reduce_to_model: spec fails validation (" + v.violations.front() + ")");
    const int N = spec.N;
    ShearResult sh = shear_transform(spec);
    const Eigen::MatrixXd Qt = sh.tilde_A.topLeftCorner(N, N);
    const Eigen::VectorXd qt = sh.tilde_A.topRightCorner(N, 1);
    const double g = spec.gamma();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Qt);
    if (es.info() != Eigen::Success) throw InternalConsistencyError("reduce_to_model: eigendecomposition failed");
    const Eigen::VectorXd lam = es.eigenvalues();
    if (!(lam.minCoeff() > detail::pd_relative_tolerance * lam.maxCoeff()) || !(lam.minCoeff() > 0.0))
        throw InternalConsistencyError("reduce_to_model: singular Q~");
    const Eigen::MatrixXd& V = es.eigenvectors();
    const Eigen::MatrixXd Qinvhalf = V * lam.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();

    ReductionResult r;
    r.tilde_A = sh.tilde_A;
    r.x_change = std::sqrt(g) * Qinvhalf;
    r.time_scale = g;
    r.general_c = spec.c;
    r.model.N = N;
    r.model.a = Qinvhalf * qt / std::sqrt(g);
    r.model.c = spec.c / g;
    if (spec.c != 0.0) r.shear = spec.d / spec.c;

    const Eigen::MatrixXd check = r.x_change * Qt * r.x_change.transpose() - g * Eigen::MatrixXd::Identity(N, N);
    if (check.norm() > 1e-12 * g * std::sqrt(double(N)) * 10.0)
        throw InternalConsistencyError("reduce_to_model: M Q~ M^T != gamma I");
    if (!(r.model.a.norm() < 1.0)) throw InternalConsistencyError("reduce_to_model: |a| >= 1 for a positive definite A");
    return r;
}

/// Identity reduction of a model operator (used to route model specs through the same code).
inline ReductionResult identity_reduction(const ModelOperatorSpec& m) {
    ReductionResult r;
    r.model = m;
    r.x_change = Eigen::MatrixXd::Identity(m.N, m.N);
    r.time_scale = 1.0;
    r.general_c = m.c;
    r.tilde_A = Eigen::MatrixXd::Identity(m.N + 1, m.N + 1);
    r.tilde_A.topRightCorner(m.N, 1) = m.a;
    r.tilde_A.bottomLeftCorner(1, m.N) = m.a.transpose();
    return r;
}

/// Phi(x, y) = (M (x - (d/c) y), y): general-operator coordinates to model coordinates.
inline Point map_point(const ReductionResult& red, const Point& z) {
    if (!(z.y > 0.0)) throw DomainError("map_point: y must be positive");
    if (z.dim() != red.N()) throw StructuralError("map_point: dimension mismatch");
    Eigen::VectorXd x = z.x;
    if (red.shear) x -= (*red.shear) * z.y;
    return {red.x_change * x, z.y};
}

inline Point map_point_inverse(const ReductionResult& red, const Point& w) {
    if (!(w.y > 0.0)) throw DomainError("map_point_inverse: y must be positive");
    if (w.dim() != red.N()) throw StructuralError("map_point_inverse: dimension mismatch");
    Eigen::VectorXd x = red.x_change.partialPivLu().solve(w.x);
    if (red.shear) x += (*red.shear) * w.y;
    return {x, w.y};
}

/// Kernel of the general operator from the model kernel value p_model(gamma t, Phi(z1), Phi(z2)).
/// Both kernels are written against their own weighted measure: y^{c/gamma} dz for the general operator
/// (the y-weight is unchanged by Phi) and y^{c_model} dz for the model, so the only Jacobian is |det M|.
inline double map_kernel_value(const ReductionResult& red, double /*t*/, const Point& z1, const Point& z2,
                               double p_model_value) {
    if (!(z1.y > 0.0) || !(z2.y > 0.0)) throw DomainError("map_kernel_value: y must be positive");
    return std::abs(red.det_M()) * p_model_value;
}

} // namespace hkb
